#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace panelq {

inline double normal_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

/// Standard normal quantile, Wichura's AS 241 (PPND16), |error| < 1e-15.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile argument outside (0,1)");
    const double q = p - 0.5;
    double r;
    if (std::abs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2509.0809287301226727 * r + 33430.575583588128105) * r +
                     67265.770927008700853) * r + 45921.953931549871457) * r +
                   13731.693765509461125) * r + 1971.5909503065514427) * r +
                 133.14166789178437745) * r + 3.387132872796366608) /
               (((((((5226.495278852545703 * r + 28729.085735721942674) * r +
                     39307.89580009271061) * r + 21213.794301586595867) * r +
                   5394.1960214247511077) * r + 687.1870074920579083) * r +
                 42.313330701600911252) * r + 1.0);
    }
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r +
                    0.24178072517745061177) * r + 1.27045825245236838258) * r +
                  3.64784832476320460504) * r + 5.7694972214606914055) * r +
                4.6303378461565452959) * r + 1.42343711074968357734) /
              (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r +
                    0.0151986665636164571966) * r + 0.14810397642748007459) * r +
                  0.68976733498510000455) * r + 1.6763848301838038494) * r +
                2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    0.0012426609473880784386) * r + 0.026532189526576123093) * r +
                  0.29656057182850489123) * r + 1.7848265399172913358) * r +
                5.4637849111641143699) * r + 6.6579046435011037772) /
              (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r +
                    1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
                  0.0148753612908506148525) * r + 0.13692988092273580531) * r +
                0.59983220655588793769) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

/// Student t with 3 degrees of freedom: cdf in closed form, quantile by
/// Newton refinement. Not variance-standardized.
inline double student_t3_cdf(double t) {
    static const double inv_pi = 0.31830988618367167;
    static const double sqrt3 = 1.7320508075688772935;
    return 0.5 + inv_pi * (std::atan(t / sqrt3) + (t / sqrt3) / (1.0 + t * t / 3.0));
}

inline double student_t3_pdf(double t) {
    static const double c = 0.36755259694786136634;  // 2/(pi*sqrt(3))
    const double b = 1.0 + t * t / 3.0;
    return c / (b * b);
}

inline double student_t3_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile argument outside (0,1)");
    if (p == 0.5) return 0.0;
    // normal start, then bracketed Newton
    double t = normal_quantile(p) * 1.2;
    double lo = -1e8, hi = 1e8;
    for (int it = 0; it < 100; ++it) {
        const double f = student_t3_cdf(t) - p;
        if (f > 0.0) hi = t; else lo = t;
        const double d = student_t3_pdf(t);
        double step = f / d;
        double next = t - step;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - t) <= 1e-15 * (1.0 + std::abs(t))) return next;
        t = next;
    }
    return t;
}

}  // namespace panelq
