//! Per-iteration classification of interface faces into CONTACT / FLOW /
//! TRAP(id) / NONE by connected-component labelling of the face graph, with
//! trapped-zone bookkeeping across iterations and load steps.

use crate::geometry::InterfaceGraph;
use crate::trapped::TrappedZone;

/// Local status of one interface face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceLabel {
    None,
    Contact,
    Flow,
    Trap(u32),
}

impl FaceLabel {
    /// Cell encoding used in VTK output: 0 = CONTACT, 1 = FLOW,
    /// 2 + k = TRAP(k); NONE (possible outside full two-way coupling) is -1.
    pub fn encode(&self) -> i32 {
        match self {
            FaceLabel::None => -1,
            FaceLabel::Contact => 0,
            FaceLabel::Flow => 1,
            FaceLabel::Trap(id) => 2 + *id as i32,
        }
    }
}

/// CONTACT for every face with at least one active node, NONE otherwise.
pub fn label_contact(face_active: &[bool]) -> Vec<FaceLabel> {
    face_active
        .iter()
        .map(|&a| if a { FaceLabel::Contact } else { FaceLabel::None })
        .collect()
}

/// Floods FLOW from the Dirichlet seed faces through NONE faces. CONTACT
/// faces block propagation. The search is an explicit-stack DFS; recursion
/// depth would otherwise scale with the face count.
pub fn flood_flow(labels: &mut [FaceLabel], graph: &InterfaceGraph, seeds: &[u32]) {
    let mut stack: Vec<u32> = Vec::new();
    for &s in seeds {
        if labels[s as usize] == FaceLabel::None {
            labels[s as usize] = FaceLabel::Flow;
            stack.push(s);
            while let Some(f) = stack.pop() {
                for &nb in &graph.neighbors[f as usize] {
                    if labels[nb as usize] == FaceLabel::None {
                        labels[nb as usize] = FaceLabel::Flow;
                        stack.push(nb);
                    }
                }
            }
        }
    }
}

/// Everything the trapped-zone identification needs from the previous
/// converged load step.
pub struct PreviousStep<'a> {
    pub labels: &'a [FaceLabel],
    /// Nodal flow pressures of a face at the previous converged step, used
    /// for the initial pressure of newly formed pools.
    pub face_pressures: &'a dyn Fn(u32) -> [f64; 4],
    /// Pool volume of a face set evaluated at the previous converged
    /// displacement field, used for the initial volume of new pools.
    pub volume_of_faces: &'a dyn Fn(&[u32]) -> f64,
}

/// Identifies trapped zones among the remaining NONE faces and reconciles
/// them with the registry (Algorithm 3 shape):
///
/// * zones that did not survive a converged step are rebuilt from scratch
///   each iteration, with deterministic ids and formation state derived from
///   the previous converged step;
/// * a component containing faces of a previous-step zone inherits that
///   zone's formation state; if it overlaps several previous zones (a merge,
///   which the tracking does not model), the one with the largest previous
///   volume wins and a warning is recorded.
///
/// Returns warnings emitted during identification.
pub fn identify_trapped_zones(
    labels: &mut [FaceLabel],
    graph: &InterfaceGraph,
    registry: &mut Vec<TrappedZone>,
    prev: &PreviousStep<'_>,
    current_step: u32,
) -> Vec<String> {
    let mut warnings = Vec::new();

    // Zones created earlier in this load step are rebuilt; surviving zones
    // keep their formation state but get fresh face lists.
    registry.retain(|z| z.existed_at_previous_step);
    for z in registry.iter_mut() {
        z.faces.clear();
    }

    // Connected components of NONE faces, scanned in face order.
    let mut next_id = registry.iter().map(|z| z.id + 1).max().unwrap_or(1);
    for &l in prev.labels {
        if let FaceLabel::Trap(id) = l {
            next_id = next_id.max(id + 1);
        }
    }

    let mut stack: Vec<u32> = Vec::new();
    for f0 in 0..labels.len() {
        if labels[f0] != FaceLabel::None {
            continue;
        }
        // Collect the component.
        let mut component: Vec<u32> = Vec::new();
        labels[f0] = FaceLabel::Trap(u32::MAX); // placeholder to mark visited
        stack.push(f0 as u32);
        while let Some(f) = stack.pop() {
            component.push(f);
            for &nb in &graph.neighbors[f as usize] {
                if labels[nb as usize] == FaceLabel::None {
                    labels[nb as usize] = FaceLabel::Trap(u32::MAX);
                    stack.push(nb);
                }
            }
        }
        component.sort_unstable();

        // Previous-step zones overlapping this component.
        let mut inherited: Vec<u32> = Vec::new();
        for &f in &component {
            if let FaceLabel::Trap(id) = prev.labels[f as usize] {
                if !inherited.contains(&id) {
                    inherited.push(id);
                }
            }
        }

        let id = if inherited.is_empty() {
            let id = next_id;
            next_id += 1;
            // New pool: formation volume from the previous converged
            // displacement field, formation pressure as the arithmetic mean
            // of the previous-step nodal flow pressures over its faces.
            let v0 = (prev.volume_of_faces)(&component);
            let mut psum = 0.0;
            let mut count = 0usize;
            for &f in &component {
                for p in (prev.face_pressures)(f) {
                    psum += p;
                    count += 1;
                }
            }
            let p0 = if count > 0 { psum / count as f64 } else { 0.0 };
            registry.push(TrappedZone {
                id,
                faces: component.clone(),
                v0: v0.max(0.0),
                p0,
                created_step: current_step,
                existed_at_previous_step: false,
            });
            id
        } else {
            let id = if inherited.len() == 1 {
                inherited[0]
            } else {
                // Merge of previous pools: inherit the largest one.
                let best = inherited
                    .iter()
                    .copied()
                    .max_by(|a, b| {
                        let va = registry.iter().find(|z| z.id == *a).map_or(0.0, |z| z.v0);
                        let vb = registry.iter().find(|z| z.id == *b).map_or(0.0, |z| z.v0);
                        va.partial_cmp(&vb).unwrap()
                    })
                    .unwrap();
                warnings.push(format!(
                    "trapped zones {:?} merged into one pool; inheriting zone {} (largest formation volume)",
                    inherited, best
                ));
                best
            };
            match registry.iter_mut().find(|z| z.id == id) {
                Some(zone) => zone.faces.extend_from_slice(&component),
                None => {
                    // The previous-step zone is not in the registry (possible
                    // only on malformed restarts); recreate it conservatively.
                    warnings.push(format!("zone {id} missing from registry; recreated"));
                    registry.push(TrappedZone {
                        id,
                        faces: component.clone(),
                        v0: (prev.volume_of_faces)(&component).max(0.0),
                        p0: 0.0,
                        created_step: current_step,
                        existed_at_previous_step: false,
                    });
                }
            }
            id
        };
        for &f in &component {
            labels[f as usize] = FaceLabel::Trap(id);
        }
    }

    // Zones whose faces all reopened contribute nothing this iteration.
    registry.retain(|z| !z.faces.is_empty() || z.existed_at_previous_step);
    registry.sort_by_key(|z| z.id);
    warnings
}

/// Number of faces whose label differs between two equally long label
/// arrays; TRAP ids are compared by identity.
pub fn count_status_changes(current: &[FaceLabel], reference: &[FaceLabel]) -> usize {
    assert_eq!(current.len(), reference.len(), "label arrays must have equal length");
    current.iter().zip(reference.iter()).filter(|(a, b)| a != b).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_interface_graph;

    /// 5x5 grid, a contact ring around the center face.
    fn ring_activity() -> Vec<bool> {
        let mut active = vec![false; 25];
        for (i, j) in [
            (1, 1),
            (2, 1),
            (3, 1),
            (1, 2),
            (3, 2),
            (1, 3),
            (2, 3),
            (3, 3),
        ] {
            active[j * 5 + i] = true;
        }
        active
    }

    fn seeds_rows(fx: usize, fy: usize) -> Vec<u32> {
        // Faces owning an inlet (j = 0) or outlet (j = fy - 1) node.
        let mut s: Vec<u32> = (0..fx as u32).collect();
        s.extend(((fy - 1) * fx..fy * fx).map(|f| f as u32));
        s
    }

    #[test]
    fn contact_labelling_trivial_cases() {
        assert!(label_contact(&[false; 9]).iter().all(|&l| l == FaceLabel::None));
        assert!(label_contact(&[true; 9]).iter().all(|&l| l == FaceLabel::Contact));
        let labels = label_contact(&ring_activity());
        assert_eq!(labels.iter().filter(|&&l| l == FaceLabel::Contact).count(), 8);
    }

    #[test]
    fn open_interface_floods_entirely() {
        let graph = build_interface_graph(5, 5, false);
        let mut labels = label_contact(&[false; 25]);
        flood_flow(&mut labels, &graph, &seeds_rows(5, 5));
        assert!(labels.iter().all(|&l| l == FaceLabel::Flow));
    }

    #[test]
    fn contact_ring_blocks_interior() {
        let graph = build_interface_graph(5, 5, false);
        let mut labels = label_contact(&ring_activity());
        flood_flow(&mut labels, &graph, &seeds_rows(5, 5));
        // Exterior flows, the enclosed center face stays NONE.
        assert_eq!(labels[2 * 5 + 2], FaceLabel::None);
        let flow = labels.iter().filter(|&&l| l == FaceLabel::Flow).count();
        assert_eq!(flow, 25 - 8 - 1);
    }

    #[test]
    fn full_band_blocks_percolation() {
        let graph = build_interface_graph(5, 5, false);
        let mut active = vec![false; 25];
        for i in 0..5 {
            active[2 * 5 + i] = true; // contact band across row j = 2
        }
        let mut labels = label_contact(&active);
        // Seeds only from the inlet row.
        let seeds: Vec<u32> = (0..5).collect();
        flood_flow(&mut labels, &graph, &seeds);
        for i in 0..5 {
            assert_eq!(labels[3 * 5 + i], FaceLabel::None);
            assert_eq!(labels[4 * 5 + i], FaceLabel::None);
        }
    }

    fn no_prev_pressure(_: u32) -> [f64; 4] {
        [0.0; 4]
    }

    #[test]
    fn enclosed_pocket_becomes_one_zone() {
        let graph = build_interface_graph(5, 5, false);
        let mut labels = label_contact(&ring_activity());
        flood_flow(&mut labels, &graph, &seeds_rows(5, 5));
        let mut registry = Vec::new();
        let prev_labels = vec![FaceLabel::Flow; 25];
        let vol = |faces: &[u32]| 1e-12 * faces.len() as f64;
        let pressures = |_: u32| [3.0e6; 4];
        let prev = PreviousStep {
            labels: &prev_labels,
            face_pressures: &pressures,
            volume_of_faces: &vol,
        };
        let warnings = identify_trapped_zones(&mut labels, &graph, &mut registry, &prev, 4);
        assert!(warnings.is_empty());
        assert_eq!(registry.len(), 1);
        let z = &registry[0];
        assert_eq!(z.id, 1);
        assert_eq!(z.faces, vec![12]);
        assert_eq!(z.p0, 3.0e6);
        assert_eq!(z.v0, 1e-12);
        assert_eq!(z.created_step, 4);
        assert!(!z.existed_at_previous_step);
        assert_eq!(labels[12], FaceLabel::Trap(1));
        // Partition is complete: no NONE faces left.
        assert!(labels.iter().all(|&l| l != FaceLabel::None));
    }

    #[test]
    fn zone_inherits_formation_state_across_steps() {
        let graph = build_interface_graph(5, 5, false);
        // Previous converged step: center face was TRAP(7).
        let mut prev_labels = vec![FaceLabel::Flow; 25];
        for (f, a) in ring_activity().iter().enumerate() {
            if *a {
                prev_labels[f] = FaceLabel::Contact;
            }
        }
        prev_labels[12] = FaceLabel::Trap(7);
        let mut registry = vec![TrappedZone {
            id: 7,
            faces: vec![12],
            v0: 4.2e-13,
            p0: 1.1e6,
            created_step: 2,
            existed_at_previous_step: true,
        }];
        let mut labels = label_contact(&ring_activity());
        flood_flow(&mut labels, &graph, &seeds_rows(5, 5));
        let vol = |_: &[u32]| 9.9e-9; // must NOT be used for inherited zones
        let prev = PreviousStep {
            labels: &prev_labels,
            face_pressures: &no_prev_pressure,
            volume_of_faces: &vol,
        };
        identify_trapped_zones(&mut labels, &graph, &mut registry, &prev, 3);
        assert_eq!(registry.len(), 1);
        assert_eq!(registry[0].id, 7);
        assert_eq!(registry[0].v0, 4.2e-13);
        assert_eq!(registry[0].p0, 1.1e6);
        assert_eq!(labels[12], FaceLabel::Trap(7));
    }

    #[test]
    fn fresh_zones_are_rebuilt_deterministically() {
        // A zone created mid-step (existed_at_previous_step = false) is
        // discarded and recreated with the same id on the next iteration.
        let graph = build_interface_graph(5, 5, false);
        let prev_labels = vec![FaceLabel::Flow; 25];
        let vol = |faces: &[u32]| 2e-13 * faces.len() as f64;
        let prev = PreviousStep {
            labels: &prev_labels,
            face_pressures: &no_prev_pressure,
            volume_of_faces: &vol,
        };
        let mut registry = Vec::new();
        for _ in 0..3 {
            let mut labels = label_contact(&ring_activity());
            flood_flow(&mut labels, &graph, &seeds_rows(5, 5));
            identify_trapped_zones(&mut labels, &graph, &mut registry, &prev, 9);
            assert_eq!(registry.len(), 1);
            assert_eq!(registry[0].id, 1);
            assert_eq!(labels[12], FaceLabel::Trap(1));
        }
    }

    #[test]
    fn merge_inherits_largest_zone_with_warning() {
        // Two previous pools (columns 1 and 3 of row 2 enclosed separately)
        // merge into one pocket when the wall between them opens.
        let graph = build_interface_graph(5, 5, false);
        let mut prev_labels = vec![FaceLabel::Contact; 25];
        prev_labels[2 * 5 + 1] = FaceLabel::Trap(1);
        prev_labels[2 * 5 + 3] = FaceLabel::Trap(2);
        let mut registry = vec![
            TrappedZone {
                id: 1,
                faces: vec![11],
                v0: 1.0e-13,
                p0: 1e6,
                created_step: 1,
                existed_at_previous_step: true,
            },
            TrappedZone {
                id: 2,
                faces: vec![13],
                v0: 5.0e-13,
                p0: 2e6,
                created_step: 1,
                existed_at_previous_step: true,
            },
        ];
        // Now the whole row j=2 strip (faces 10..15) is out of contact and
        // enclosed by contact everywhere else.
        let mut active = vec![true; 25];
        for i in 0..5 {
            active[2 * 5 + i] = false;
        }
        let mut labels = label_contact(&active);
        flood_flow(&mut labels, &graph, &seeds_rows(5, 5));
        let vol = |faces: &[u32]| 1e-13 * faces.len() as f64;
        let prev = PreviousStep {
            labels: &prev_labels,
            face_pressures: &no_prev_pressure,
            volume_of_faces: &vol,
        };
        let warnings = identify_trapped_zones(&mut labels, &graph, &mut registry, &prev, 5);
        assert_eq!(warnings.len(), 1);
        // Zone 2 has the larger formation volume and wins.
        for i in 0..5 {
            assert_eq!(labels[2 * 5 + i], FaceLabel::Trap(2));
        }
        let z2 = registry.iter().find(|z| z.id == 2).unwrap();
        assert_eq!(z2.faces.len(), 5);
        // Zone 1 survives in the registry with no faces this iteration.
        assert!(registry.iter().any(|z| z.id == 1 && z.faces.is_empty()));
    }

    #[test]
    fn labelling_is_independent_of_seed_order() {
        let graph = build_interface_graph(6, 6, true);
        let mut active = vec![false; 36];
        for f in [7, 8, 9, 13, 15, 19, 20, 21, 27] {
            active[f] = true;
        }
        let seeds = seeds_rows(6, 6);
        let mut rev = seeds.clone();
        rev.reverse();
        let mut a = label_contact(&active);
        flood_flow(&mut a, &graph, &seeds);
        let mut b = label_contact(&active);
        flood_flow(&mut b, &graph, &rev);
        assert_eq!(a, b);
        assert_eq!(count_status_changes(&a, &b), 0);
    }

    #[test]
    fn status_change_counting() {
        let a = vec![FaceLabel::Flow, FaceLabel::Contact, FaceLabel::Trap(1)];
        assert_eq!(count_status_changes(&a, &a), 0);
        let b = vec![FaceLabel::Contact, FaceLabel::Flow, FaceLabel::Trap(2)];
        assert_eq!(count_status_changes(&a, &b), 3);
        let c = vec![FaceLabel::Flow, FaceLabel::Contact, FaceLabel::Trap(2)];
        assert_eq!(count_status_changes(&a, &c), 1);
    }

    #[test]
    #[should_panic(expected = "equal length")]
    fn status_change_length_mismatch_panics() {
        let a = vec![FaceLabel::Flow];
        let b = vec![FaceLabel::Flow, FaceLabel::Contact];
        count_status_changes(&a, &b);
    }
}
