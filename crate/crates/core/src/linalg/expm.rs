//! Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
//!
//! Coefficients and the θ₁₃ threshold are Higham's ("The scaling and
//! squaring method for the matrix exponential revisited", 2005). The
//! lower-degree approximants are skipped: the matrices here are tiny, so
//! the saving is not worth the extra branches.

use super::{lu_factor, DenseMatrix, Tolerances};
use crate::error::{Error, Result};

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

/// `exp(s·M)`.
pub fn expm(m: &DenseMatrix, s: f64) -> Result<DenseMatrix> {
    m.require_square("expm input")?;
    if !s.is_finite() {
        return Err(Error::validation("s", "scale factor must be finite"));
    }
    let n = m.rows();
    if s == 0.0 || n == 0 {
        return Ok(DenseMatrix::identity(n));
    }
    let a = m.scale(s).check_overflow()?;
    let norm = a.norm_1();
    if norm == 0.0 {
        return Ok(DenseMatrix::identity(n));
    }

    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a.scale(2f64.powi(-squarings));

    let id = DenseMatrix::identity(n);
    let a2 = a.matmul(&a)?;
    let a4 = a2.matmul(&a2)?;
    let a6 = a4.matmul(&a2)?;
    let b = &PADE13;

    let lin = |terms: &[(&DenseMatrix, f64)]| -> Result<DenseMatrix> {
        let mut acc = DenseMatrix::zeros(n, n);
        for (mat, c) in terms {
            acc = acc.add(&mat.scale(*c))?;
        }
        Ok(acc)
    };

    let u_inner = lin(&[(&a6, b[13]), (&a4, b[11]), (&a2, b[9])])?;
    let u_outer = lin(&[(&a6, b[7]), (&a4, b[5]), (&a2, b[3]), (&id, b[1])])?;
    let u = a.matmul(&a6.matmul(&u_inner)?.add(&u_outer)?)?;

    let v_inner = lin(&[(&a6, b[12]), (&a4, b[10]), (&a2, b[8])])?;
    let v_outer = lin(&[(&a6, b[6]), (&a4, b[4]), (&a2, b[2]), (&id, b[0])])?;
    let v = a6.matmul(&v_inner)?.add(&v_outer)?;

    let numer = v.add(&u)?;
    let denom = v.sub(&u)?;
    let tol = Tolerances::default();
    let mut r = lu_factor(&denom, &tol)?.solve(&numer)?;

    for _ in 0..squarings {
        r = r.matmul(&r)?.check_overflow()?;
    }
    r.check_overflow()
}
