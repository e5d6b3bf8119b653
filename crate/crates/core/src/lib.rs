pub mod certify;
pub mod constraints;
pub mod diffform;
pub mod dimension;
pub mod linalg;
pub mod oracle;
pub mod pipeline;
pub mod rational;
pub mod reduction;
pub mod sdp;
pub mod symmetry;
pub mod targets;
