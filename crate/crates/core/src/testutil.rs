use crate::linalg::Mat;
use crate::lti::StateSpaceModel;
pub use crate::random::random_plant;

/// `G(z) = 1/(z − 0.5)`.
pub fn s1() -> StateSpaceModel {
    scalar(0.5, 1.0, 1.0, 0.0)
}

pub fn scalar(a: f64, b: f64, c: f64, d: f64) -> StateSpaceModel {
    StateSpaceModel::new(
        Mat::from_element(1, 1, a),
        Mat::from_element(1, 1, b),
        Mat::from_element(1, 1, c),
        Mat::from_element(1, 1, d),
    )
    .unwrap()
}
