pub mod geom;
pub mod imaging;
pub mod kinematics;
pub mod output;
pub mod pathopt;
pub mod pipeline;
pub mod stippling;
pub mod tsp;
