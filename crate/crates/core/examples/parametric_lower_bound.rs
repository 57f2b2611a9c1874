//! The n-width of a parametric family is at least max_p σ_{n+1}(p); a global
//! basis cannot do better than the hardest parameter value.

use hankel_nwidth::parametric::{continuity_check, global_basis_gap, sweep, GridSpec};
use hankel_nwidth::system::{generate, Model};

fn main() -> hankel_nwidth::Result<()> {
    let family = generate(&Model::Heat1d, 10, 0)?.into_parametric().unwrap();
    let grid = GridSpec::Tensor(vec![21]);

    let res = sweep(&family, &grid)?;
    for i in 1..=3 {
        let c = continuity_check(&res, i)?;
        println!("σ_{i}: max relative jump {:.3}, flagged {}", c.max_relative_jump, c.flagged.len());
    }

    let rep = global_basis_gap(&family, 3, &grid, 3, 42)?;
    let p = &res.grid[rep.lower_bound.index];
    println!("\nlower bound max_p σ_4(p) = {:.6e} at diffusivity {:.3}", rep.lower_bound.value, p[0]);
    for c in &rep.candidates {
        println!("  {:<16} achieved {:.6e}", c.name, c.achieved);
    }
    println!("bound respected by every basis: {}", rep.holds);
    Ok(())
}
