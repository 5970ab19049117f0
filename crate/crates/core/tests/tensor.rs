use remnet_core::tensor::*;

#[test]
fn rejects_wrong_length() {
    assert!(Tensor::from_vec(3, 2, vec![0.0; 5]).is_err());
    assert!(Tensor::from_vec(3, 2, vec![0.0; 6]).is_ok());
}

#[test]
fn row_major_indexing() {
    let t = Tensor::from_vec(2, 3, vec![0., 1., 2., 3., 4., 5.]).unwrap();
    assert_eq!(t.at(1, 0), 3.0);
    assert_eq!(t.at(0, 2), 2.0);
}

#[test]
fn relu_is_idempotent() {
    let t = Tensor::from_vec(4, 1, vec![-1.0, 0.5, -0.0, 2.0]).unwrap();
    let once = t.relu();
    assert_eq!(once, once.relu());
    assert!(once.data().iter().all(|&v| v >= 0.0));
}
