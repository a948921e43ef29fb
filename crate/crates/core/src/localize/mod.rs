//! Needle decomposition of finite metric measure spaces and the
//! quantitative checks built on it.

pub mod checks;
pub mod rays;
pub mod report;
pub mod space;
pub mod transport;

pub use checks::{
    antipodal_check, ball_localization, markov_bound, AntipodalReport, BallReport, MarkovReport,
};
pub use rays::{
    extract_rays, fit_ray_density, transport_relation, NeedleDecomposition, Ray, TransportRelation,
};
pub use report::{
    classify_rays, deficit_report, quantify, DeficitReport, MainTheoremReport, Pipeline,
    PipelineConfig, RayClassification, RayLabel,
};
pub use space::{DiscreteSpace, Geometry, PerimeterModel};
pub use transport::{kantorovich_potential, localization_function, Flow, Potential};
