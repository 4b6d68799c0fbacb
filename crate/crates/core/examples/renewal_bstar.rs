//! Return probabilities of the renewal chain driven by a decay sequence.

use exomix::bounds::{bstar_sequence, bstar_total_upper};
use exomix::decay::DecaySequence;

fn main() -> exomix::Result<()> {
    let b = DecaySequence::geometric(0.5, 0.5)?;
    let bstar = bstar_sequence(&b, 12)?;
    for n in 0..=12 {
        println!("b*_{n:<2} = {:.6}", bstar.at(n)?);
    }
    println!("sum b* <= {:.4}", bstar_total_upper(&b)?);

    let c = DecaySequence::constant(0.3)?;
    println!("constant b = 0.3 gives b*_5 = {:.6}", bstar_sequence(&c, 5)?.at(5)?);
    Ok(())
}
