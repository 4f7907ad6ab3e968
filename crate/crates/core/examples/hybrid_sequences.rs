//! Building a hybrid sequence by hand and querying its domain.

use hybrid_ttsa::hybrid_time::{omega_limit_estimate, HybridIndex, HybridSequence};

fn main() -> hybrid_ttsa::Result<()> {
    // x decays by 10% per flow step and is reset to x/2 every fifth step.
    let mut seq = HybridSequence::new(&[1.0]);
    for k in 0..20 {
        if k > 0 && k % 5 == 0 {
            let x = seq.last()[0];
            seq.push_jump(&[x / 2.0]);
        }
        let x = seq.last()[0];
        seq.push_flow(&[0.9 * x]);
    }

    let dom = seq.domain();
    println!("points: {}, flows: {}, jumps: {}", dom.len(), dom.max_k(), dom.num_jumps());
    println!("jump indices: {:?}", dom.jump_indices());
    for k in [4, 5, 19, 20] {
        println!("jbar({k}) = {:?}", seq.jbar(k));
    }
    for j in [0, 2, 3] {
        println!("kbar({j}) = {:?}", seq.kbar(j));
    }
    println!("phi(10, 2) = {:?}", seq.get(HybridIndex::new(10, 2)));

    let mut csv = Vec::new();
    seq.write_csv(&mut csv).expect("in-memory write");
    let back = HybridSequence::read_csv(csv.as_slice()).expect("round trip");
    assert_eq!(back, seq);

    let omega = omega_limit_estimate(&seq, 0.2, 0.05)?;
    println!("tail clusters: {omega:?}");
    Ok(())
}
