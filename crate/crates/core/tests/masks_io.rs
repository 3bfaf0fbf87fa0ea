use detkit::geometry::{BinaryMask, BoundingBox};
use detkit::io::{read_edge_map, read_mask, write_mask, Provenance};
use detkit::maskprop::{fill_holes, largest_component, propagate_mask, refine_with_edges, EdgeMap};
use detkit_testkit::ellipse_mask;

#[test]
fn mask_png_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/m.png");
    let m = ellipse_mask(17, 11);
    write_mask(&path, &m, Some(&Provenance::new("test"))).unwrap();
    assert_eq!(read_mask(&path).unwrap(), m);
    let first = std::fs::read(&path).unwrap();
    write_mask(&path, &m, Some(&Provenance::new("test"))).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn edge_png_refines_to_filled_outline() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("edges.png");
    let (w, h) = (40u32, 30u32);
    let outline = |x: u32, y: u32| (8..=30).contains(&x) && (6..=22).contains(&y) && (x == 8 || x == 30 || y == 6 || y == 22);
    let img = image::GrayImage::from_fn(w, h, |x, y| image::Luma([if outline(x, y) { 255 } else { 0 }]));
    img.save(&path).unwrap();
    let edges = read_edge_map(&path).unwrap();
    let bbox = BoundingBox::new(4.0, 3.0, 35.0, 27.0).unwrap();
    let m = refine_with_edges(&edges, &bbox, 5, 0.05).unwrap();
    let want = BinaryMask::from_fn(w, h, |x, y| (8..=30).contains(&x) && (6..=22).contains(&y));
    assert_eq!(m, want);
}

#[test]
fn flat_edges_have_no_boundary() {
    let edges = EdgeMap::new(10, 10, vec![0.5; 100]).unwrap();
    let bbox = BoundingBox::new(1.0, 1.0, 9.0, 9.0).unwrap();
    assert!(refine_with_edges(&edges, &bbox, 3, 0.0).is_err());
}

#[test]
fn component_and_hole_helpers() {
    let m = BinaryMask::from_fn(12, 12, |x, y| {
        let ring = (2..=8).contains(&x) && (2..=8).contains(&y) && !((3..=7).contains(&x) && (3..=7).contains(&y));
        ring || (x == 11 && y == 11)
    });
    let big = largest_component(&m).unwrap();
    assert!(!big.get(11, 11));
    let filled = fill_holes(&big);
    assert_eq!(filled.count(), 49);
}

#[test]
fn propagation_through_a_sequence_keeps_shape() {
    let mut mask = ellipse_mask(40, 30);
    let mut prev = BoundingBox::new(10.0, 10.0, 50.0, 40.0).unwrap();
    for step in 1..=5 {
        let cur = prev.translate(3.0, 1.0);
        let out = propagate_mask(&mask, &prev, &cur).unwrap();
        assert!(!out.empty);
        assert_eq!(out.mask, ellipse_mask(40, 30), "step {step}");
        mask = out.mask;
        prev = cur;
    }
    let wrong = BinaryMask::filled(3, 3);
    assert!(propagate_mask(&wrong, &prev, &prev).is_err());
}
