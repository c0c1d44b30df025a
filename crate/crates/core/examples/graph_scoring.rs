//! Score an estimated edge set against a ground-truth graph.

use chamber_twin::graph::{edge_precision_recall, Edge, GroundTruthGraph};
use chamber_twin::variables::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = GroundTruthGraph::for_config(Config::WtStandard);
    println!("{} nodes, {} edges, acyclic: {}", truth.nodes().count(), truth.edge_count(), truth.is_acyclic());
    println!("parents of pressure_downwind: {:?}", truth.parents("pressure_downwind").collect::<Vec<_>>());

    // A guess with one right edge, one reversed edge, one spurious edge.
    let estimate = vec![
        Edge::new("load_in", "rpm_in"),
        Edge::new("rpm_out", "load_out"),
        Edge::new("pot_1", "mic"),
    ];
    let (precision, recall) = edge_precision_recall(&estimate, &truth)?;
    println!("precision {precision:.3}  recall {recall:.3}");

    print!("{}", truth.to_csv());
    Ok(())
}
