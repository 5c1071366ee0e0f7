//! Gaussian-approximation conditions along kernel families.

pub mod family;
pub mod report;
pub mod trend;

pub use family::{builtin_family, builtin_member, load_family, FamilyMember, KernelFamily, SpecFile, BUILTIN_FAMILIES};
pub use report::{run_battery, BatteryConfig, DiagnosticsReport};
pub use trend::{trend_summary, TrendSummary, TrendThresholds, Verdict};
