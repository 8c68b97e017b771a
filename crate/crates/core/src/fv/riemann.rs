/// Entropy solution of Burgers' equation `u_t + (u^2/2)_x = 0` with a jump
/// from `ul` to `ur` at the origin, evaluated at `(x, t)`.
pub fn burgers_riemann_exact(ul: f64, ur: f64, x: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return if x < 0.0 { ul } else { ur };
    }
    let xi = x / t;
    if ul > ur {
        if xi < 0.5 * (ul + ur) {
            ul
        } else {
            ur
        }
    } else if xi <= ul {
        ul
    } else if xi >= ur {
        ur
    } else {
        xi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shock_and_fan() {
        assert_eq!(burgers_riemann_exact(1.0, 0.0, 0.49, 1.0), 1.0);
        assert_eq!(burgers_riemann_exact(1.0, 0.0, 0.51, 1.0), 0.0);
        assert_eq!(burgers_riemann_exact(0.0, 1.0, 0.25, 0.5), 0.5);
        assert_eq!(burgers_riemann_exact(0.0, 1.0, -0.1, 0.5), 0.0);
        assert_eq!(burgers_riemann_exact(0.0, 1.0, 0.7, 0.5), 1.0);
        assert_eq!(burgers_riemann_exact(0.0, 1.0, 0.1, 0.0), 1.0);
    }
}
