pub mod bounds;
pub mod channels;
pub mod linalg;
pub mod models;
pub mod sdp;
