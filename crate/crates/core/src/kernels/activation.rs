use crate::Real;

/// Exact GELU, `x * Phi(x)` with `Phi` the standard normal CDF.
#[inline]
pub fn gelu<F: Real>(x: F) -> F {
    x * normal_cdf(x)
}

/// `d gelu / dx = Phi(x) + x * phi(x)`.
#[inline]
pub fn gelu_derivative<F: Real>(x: F) -> F {
    normal_cdf(x) + x * normal_pdf(x)
}

pub fn gelu_inplace<F: Real>(values: &mut [F]) {
    for v in values {
        *v = gelu(*v);
    }
}

/// Multiplies `grad` by the GELU derivative evaluated at the pre-activations.
pub fn gelu_backward<F: Real>(preact: &[F], grad: &mut [F]) {
    debug_assert_eq!(preact.len(), grad.len());
    for (g, &x) in grad.iter_mut().zip(preact) {
        *g *= gelu_derivative(x);
    }
}

#[inline]
fn normal_cdf<F: Real>(x: F) -> F {
    let half = F::lit(0.5);
    half * (F::one() + (x * F::lit(std::f64::consts::FRAC_1_SQRT_2)).erf())
}

#[inline]
fn normal_pdf<F: Real>(x: F) -> F {
    // 1 / sqrt(2 pi)
    F::lit(0.398_942_280_401_432_7) * (-(x * x) * F::lit(0.5)).exp()
}
