//! Experiment harness for step-size extrapolation of Lindblad dynamics:
//! TOML-configured pipelines, theory verification and figure recipes.

pub mod config;
pub mod experiment;
pub mod verify;

use lindblad_extrap::Error;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::Experiment;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Built-in figure recipes, by name.
pub const RECIPES: [(&str, &str); 4] = [
    ("fig1", include_str!("../recipes/fig1.toml")),
    ("fig2", include_str!("../recipes/fig2.toml")),
    ("fig3", include_str!("../recipes/fig3.toml")),
    ("fig4", include_str!("../recipes/fig4.toml")),
];

pub fn recipe(name: &str) -> Result<ExperimentConfig, ConfigError> {
    let (_, src) = RECIPES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ConfigError::plain(format!("unknown recipe '{name}' (expected fig1|fig2|fig3|fig4)")))?;
    ExperimentConfig::from_toml_str(src, &format!("recipes/{name}.toml"))
}

/// 2 for invalid configuration or an unsupported parameter regime, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return EXIT_CONFIG;
        }
        if let Some(Error::UnsupportedRegime(_)) = cause.downcast_ref::<Error>() {
            return EXIT_CONFIG;
        }
    }
    EXIT_RUNTIME
}
