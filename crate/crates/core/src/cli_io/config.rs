//! Run configuration as flat `key = value` text.

use std::path::PathBuf;

use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::interpolation::InterpolationConfig;
use crate::registration::RegistrationConfig;
use crate::shooting::{FilterTarget, ShootingConfig};

/// Every setting of a pipeline run. Paths given on the command line take
/// precedence over the ones read from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub u0: Option<PathBuf>,
    /// Second image for shooting and registration, end image for interpolation.
    pub u1: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub steps: usize,
    pub segments: usize,
    /// Defaults to one below the image level.
    pub spline_level: Option<u32>,
    /// If set, input images must have this level.
    pub image_level: Option<u32>,
    pub energy: EnergyParams,
    /// Fixed-point, smoothing and registration settings; the spline level
    /// inside is filled in once the images are known.
    pub shooting: ShootingConfig,
    pub path_iterations: usize,
    pub path_tolerance: f64,
    pub image_format: String,
    pub viz_velocity: bool,
    pub viz_modulation: bool,
    /// Seed for generated test scenes.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let interp = InterpolationConfig::new(8, 1);
        RunConfig {
            u0: None,
            u1: None,
            out: None,
            steps: 8,
            segments: 8,
            spline_level: None,
            image_level: None,
            energy: EnergyParams::default(),
            shooting: ShootingConfig::new(1),
            path_iterations: interp.max_iterations,
            path_tolerance: interp.tolerance,
            image_format: "png".into(),
            viz_velocity: true,
            viz_modulation: true,
            seed: 0,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected `key = value`", n + 1)));
            };
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip(e))))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let reg = &mut self.shooting.registration;
        match key {
            "u0" => self.u0 = Some(value.into()),
            "u1" => self.u1 = Some(value.into()),
            "out" => self.out = Some(value.into()),
            "steps" => self.steps = num(key, value)?,
            "segments" => self.segments = num(key, value)?,
            "spline_level" => self.spline_level = Some(num(key, value)?),
            "image_level" => self.image_level = Some(num(key, value)?),
            "gamma" => self.energy.gamma = num(key, value)?,
            "delta" => self.energy.delta = num(key, value)?,
            "registration.coarsest_level" => reg.coarsest_level = num(key, value)?,
            "registration.max_iterations" => reg.max_iterations = num(key, value)?,
            "registration.armijo_c1" => reg.armijo_c1 = num(key, value)?,
            "registration.backtrack" => reg.backtrack = num(key, value)?,
            "registration.gradient_tolerance" => reg.gradient_tolerance = num(key, value)?,
            "registration.restart_period" => reg.restart_period = num(key, value)?,
            "shooting.threshold" => self.shooting.threshold = num(key, value)?,
            "shooting.max_iterations" => self.shooting.max_iterations = num(key, value)?,
            "shooting.smoothing" => self.shooting.smoothing = flag(key, value)?,
            "shooting.tau0" => self.shooting.tau0 = num(key, value)?,
            "shooting.beta" => self.shooting.beta = num(key, value)?,
            "shooting.lambda" => self.shooting.lambda = num(key, value)?,
            "shooting.filter_target" => {
                self.shooting.filter_target = match value {
                    "quotient" => FilterTarget::Quotient,
                    "modulation" => FilterTarget::Modulation,
                    _ => {
                        return Err(Error::Config(format!(
                            "{key}: expected quotient or modulation, got {value:?}"
                        )))
                    }
                }
            }
            "shooting.reregister" => self.shooting.reregister = flag(key, value)?,
            "interpolation.max_iterations" => self.path_iterations = num(key, value)?,
            "interpolation.tolerance" => self.path_tolerance = num(key, value)?,
            "image_format" => {
                if value != "png" && value != "pgm" {
                    return Err(Error::Config(format!("{key}: expected png or pgm, got {value:?}")));
                }
                self.image_format = value.into();
            }
            "viz.velocity" => self.viz_velocity = flag(key, value)?,
            "viz.modulation" => self.viz_modulation = flag(key, value)?,
            "seed" => self.seed = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// All set keys with their values, sorted by key.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let reg = &self.shooting.registration;
        let sh = &self.shooting;
        let mut e: Vec<(&'static str, String)> = vec![
            ("steps", self.steps.to_string()),
            ("segments", self.segments.to_string()),
            ("gamma", self.energy.gamma.to_string()),
            ("delta", self.energy.delta.to_string()),
            ("registration.coarsest_level", reg.coarsest_level.to_string()),
            ("registration.max_iterations", reg.max_iterations.to_string()),
            ("registration.armijo_c1", reg.armijo_c1.to_string()),
            ("registration.backtrack", reg.backtrack.to_string()),
            ("registration.gradient_tolerance", reg.gradient_tolerance.to_string()),
            ("registration.restart_period", reg.restart_period.to_string()),
            ("shooting.threshold", sh.threshold.to_string()),
            ("shooting.max_iterations", sh.max_iterations.to_string()),
            ("shooting.smoothing", sh.smoothing.to_string()),
            ("shooting.tau0", sh.tau0.to_string()),
            ("shooting.beta", sh.beta.to_string()),
            ("shooting.lambda", sh.lambda.to_string()),
            (
                "shooting.filter_target",
                match sh.filter_target {
                    FilterTarget::Quotient => "quotient".into(),
                    FilterTarget::Modulation => "modulation".into(),
                },
            ),
            ("shooting.reregister", sh.reregister.to_string()),
            ("interpolation.max_iterations", self.path_iterations.to_string()),
            ("interpolation.tolerance", self.path_tolerance.to_string()),
            ("image_format", self.image_format.clone()),
            ("viz.velocity", self.viz_velocity.to_string()),
            ("viz.modulation", self.viz_modulation.to_string()),
            ("seed", self.seed.to_string()),
        ];
        let paths = [("u0", &self.u0), ("u1", &self.u1), ("out", &self.out)];
        for (k, p) in paths {
            if let Some(p) = p {
                e.push((k, p.display().to_string()));
            }
        }
        if let Some(l) = self.spline_level {
            e.push(("spline_level", l.to_string()));
        }
        if let Some(l) = self.image_level {
            e.push(("image_level", l.to_string()));
        }
        e.sort();
        e
    }

    pub fn serialize(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Spline level for images of level `image_level`.
    pub fn spline_level_for(&self, image_level: u32) -> Result<u32> {
        if let Some(m) = self.image_level {
            if m != image_level {
                return Err(Error::Config(format!(
                    "images have level {image_level} but the configuration requires {m}"
                )));
            }
        }
        let n = self.spline_level.unwrap_or(image_level.saturating_sub(1));
        if n == 0 || n >= image_level {
            return Err(Error::Config(format!(
                "spline level {n} must be between 1 and image level {image_level} - 1"
            )));
        }
        Ok(n)
    }

    pub fn registration_config(&self, level: u32) -> RegistrationConfig {
        RegistrationConfig { level, ..self.shooting.registration }
    }

    pub fn shooting_config(&self, level: u32) -> ShootingConfig {
        ShootingConfig { registration: self.registration_config(level), ..self.shooting }
    }

    pub fn interpolation_config(&self, level: u32) -> InterpolationConfig {
        InterpolationConfig {
            segments: self.segments,
            max_iterations: self.path_iterations,
            tolerance: self.path_tolerance,
            registration: self.registration_config(level),
        }
    }

    /// Checks every numeric setting against the library constraints.
    pub fn validate(&self) -> Result<()> {
        let wrap = |r: Result<()>| r.map_err(|e| Error::Config(strip(e)));
        wrap(EnergyParams::new(self.energy.gamma, self.energy.delta).map(|_| ()))?;
        let level = self.spline_level.unwrap_or(1).max(1);
        wrap(self.shooting_config(level).validate())?;
        wrap(self.interpolation_config(level).validate())?;
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.path_tolerance >= 0.0) {
            return Err(Error::Config("interpolation.tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) | Error::InvalidArgument(m) => m,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.serialize()).unwrap(), cfg);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn comments_and_whitespace() {
        let cfg = RunConfig::parse("# run\n  steps=3   # three\n\ngamma = 2e-4\nu0 = a b.pgm\n").unwrap();
        assert_eq!(cfg.steps, 3);
        assert_eq!(cfg.energy.gamma, 2e-4);
        assert_eq!(cfg.u0, Some(PathBuf::from("a b.pgm")));
    }

    #[test]
    fn bad_lines() {
        for text in ["steps", "nope = 1", "steps = -1", "shooting.smoothing = maybe", "image_format = tif"] {
            assert!(matches!(RunConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
        let cfg = RunConfig::parse("shooting.beta = 1.5").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn spline_level_defaults_below_image_level() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.spline_level_for(8).unwrap(), 7);
        let cfg = RunConfig::parse("spline_level = 8").unwrap();
        assert!(cfg.spline_level_for(8).is_err());
        let cfg = RunConfig::parse("image_level = 7").unwrap();
        assert!(cfg.spline_level_for(8).is_err());
    }
}
