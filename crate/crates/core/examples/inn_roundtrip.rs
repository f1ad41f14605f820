//! Splits random features with a randomly initialised coupling stack and
//! reconstructs them, printing the worst round-trip error per width.

use candle_core::{DType, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use pseudoref::nets::InvertibleStack;
use pseudoref::tensor::DEVICE;

fn main() -> pseudoref::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for dim in [8usize, 64, 128] {
        let stack = InvertibleStack::new_random(dim, 3, 64, 2.0, &mut rng, DType::F32)?;
        let x: Vec<f32> = (0..256 * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x = Tensor::from_vec(x, (256, dim), &DEVICE)?;
        let (pr, pd) = stack.forward(&x)?;
        let back = stack.inverse(&pr, &pd)?;
        let err = back.sub(&x)?.abs()?.max_all()?.to_scalar::<f32>()?;
        println!("dim {dim:>3}: halves {:?} + {:?}, max |x - inv(fwd(x))| = {err:.2e}", pr.dims(), pd.dims());
    }
    Ok(())
}
