//! Independent assembly paths checked against the tensor-form operators,
//! and the discrete energy identities.

mod common;

use common::*;
use uwdg::kdv::FluxVariant1D;
use uwdg::mesh::SpaceSpec;
use uwdg::space::Space;
use uwdg::zk::{FluxVariant2D, ZkKind};

#[test]
fn kdv_operator_matches_elementwise_assembly() {
    for var in [FluxVariant1D::A, FluxVariant1D::B] {
        for sp in [Space::hier(&SpaceSpec::full(1, 2, 2)), Space::nodal(1, 2, 2), Space::hier(&SpaceSpec::full(1, 3, 3))] {
            let dev = kdv_deviation(&sp, var);
            assert!(dev <= 1e-12, "{var:?}: {dev}");
        }
    }
}

#[test]
fn zk_operator_matches_edge_vertex_and_cellwise_forms() {
    let cases = [
        (Space::hier(&SpaceSpec::full(2, 2, 1)), ZkKind::Simplified, FluxVariant2D::Main),
        (Space::hier(&SpaceSpec::full(2, 2, 1)), ZkKind::Simplified, FluxVariant2D::Alt),
        (Space::hier(&SpaceSpec::full(2, 2, 2)), ZkKind::Full, FluxVariant2D::Main),
        (Space::hier(&SpaceSpec::full(2, 2, 2)), ZkKind::Full, FluxVariant2D::Alt),
        (Space::nodal(2, 1, 2), ZkKind::Full, FluxVariant2D::Main),
    ];
    for (sp, kind, var) in cases {
        let (d1, d2) = zk_deviation(&sp, kind, var);
        assert!(d1 <= 1e-12 && d2 <= 1e-12, "{kind:?} {var:?}: {d1} {d2}");
    }
}

#[test]
fn energy_identity_1d() {
    for var in [FluxVariant1D::A, FluxVariant1D::B] {
        let dev = common::energy_identity_1d(var, 3, 2, 100, 11);
        assert!(dev <= 1e-10, "{var:?}: {dev}");
    }
}

#[test]
fn energy_identity_2d() {
    for kind in [ZkKind::Full, ZkKind::Simplified] {
        for var in [FluxVariant2D::Main, FluxVariant2D::Alt] {
            let (dev, qmax) = common::energy_identity_2d(kind, var, 2, 2, 100, 5);
            assert!(dev <= 1e-10, "{kind:?} {var:?}: {dev}");
            assert!(qmax <= 1e-12, "{kind:?} {var:?}: u^T L u = {qmax}");
        }
    }
}
