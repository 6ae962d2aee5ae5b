use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::wire::VitalSigns;

/// Emulated pulse and temperature sensors: uniform draws inside the
/// configured ranges, optionally preceded by a fixed script of readings.
#[derive(Debug, Clone)]
pub struct SensorModel {
    rng: ChaCha8Rng,
    hr_range: (u32, u32),
    temp_range: (u32, u32),
    script: VecDeque<VitalSigns>,
}

impl SensorModel {
    /// Ranges are inclusive; `temp_range` is in tenths of °F.
    pub fn new(rng: ChaCha8Rng, hr_range: (u32, u32), temp_range: (u32, u32)) -> Self {
        assert!(hr_range.0 <= hr_range.1 && temp_range.0 <= temp_range.1, "empty sensor range");
        Self {
            rng,
            hr_range,
            temp_range,
            script: VecDeque::new(),
        }
    }

    pub fn with_script(mut self, script: impl IntoIterator<Item = VitalSigns>) -> Self {
        self.script = script.into_iter().collect();
        self
    }

    pub fn sample_vitals(&mut self) -> VitalSigns {
        if let Some(v) = self.script.pop_front() {
            return v;
        }
        let hr = self.rng.gen_range(self.hr_range.0..=self.hr_range.1);
        let temp = self.rng.gen_range(self.temp_range.0..=self.temp_range.1);
        VitalSigns::new(hr, temp)
    }
}
