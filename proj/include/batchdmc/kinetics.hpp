/// @file kinetics.hpp
/// Nonlinear model of a jacketed batch reactor running free-radical solution
/// polymerization of methyl methacrylate.
///
/// The state is closed in four variables: monomer conversion, initiator
/// concentration, reactor temperature and jacket-oil temperature. Radical
/// concentration follows from the quasi-steady-state and long-chain
/// approximations; diffusion control of propagation and termination (glass and
/// gel effects) uses the Chiu-Carratt-Soong free-volume correction.

#pragma once

#include <batchdmc/errors.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

namespace batchdmc {

inline constexpr double kGasConstant = 8.314;     ///< J/(mol K)
inline constexpr double kCelsiusOffset = 273.15;  ///< K at 0 degC

inline constexpr int kNumStates = 4;
using StateVector = Eigen::Vector4d;

/// Index of each state inside a StateVector.
enum StateIndex : int { kConversion = 0, kInitiator = 1, kReactorTemp = 2, kJacketTemp = 3 };

struct ReactorState {
    double x = 0.0;          ///< conversion, mass fraction of monomer converted
    double i_conc = 0.0;     ///< initiator concentration, mol/L
    double t_reactor = 0.0;  ///< K
    double t_jacket = 0.0;   ///< K

    StateVector to_vector() const { return {x, i_conc, t_reactor, t_jacket}; }

    static ReactorState from_vector(const StateVector& v) { return {v[0], v[1], v[2], v[3]}; }

    bool operator==(const ReactorState&) const = default;
};

/// Throws InvalidParameter unless 0 <= x <= 1, i_conc >= 0 and both temperatures are positive.
inline void validate(const ReactorState& s)
{
    detail::require(std::isfinite(s.x) && s.x >= 0.0 && s.x <= 1.0, "conversion x must lie in [0, 1]");
    detail::require(std::isfinite(s.i_conc) && s.i_conc >= 0.0, "initiator concentration must be >= 0");
    detail::require(std::isfinite(s.t_reactor) && s.t_reactor > 0.0, "reactor temperature must be > 0 K");
    detail::require(std::isfinite(s.t_jacket) && s.t_jacket > 0.0, "jacket temperature must be > 0 K");
}

/// Kinetic and thermal constants of the plant. Arrhenius pre-factors pair with
/// activation energies in J/mol; temperatures are absolute.
struct PlantParams {
    // initiator decomposition, 1/s
    double kd0 = 0.0;
    double ed = 0.0;
    // propagation, L/(mol s)
    double kp0_pre = 0.0;
    double ep = 0.0;
    // termination, L/(mol s)
    double kt0_pre = 0.0;
    double et = 0.0;
    // chain transfer to monomer, L/(mol s)
    double kf_pre = 0.0;
    double ef = 0.0;

    double f = 0.5;  ///< initiator efficiency

    // free-volume (CCS) correction
    double theta_p = 0.0;  ///< s
    double theta_t = 0.0;  ///< s
    double ccs_a = 0.0;
    double ccs_b = 0.0;

    double rho_m = 0.0;  ///< g/cm^3
    double rho_p = 0.0;  ///< g/cm^3
    double f_s = 0.0;    ///< solvent volume fraction in the feed

    double m0 = 0.0;        ///< initial monomer mass, g
    double m_cp = 0.0;      ///< reactor contents heat capacity, J/K
    double mo_cpo = 0.0;    ///< jacket oil heat capacity, J/K
    double ua_r = 0.0;      ///< reactor-jacket, W/K
    double ua_inf = 0.0;    ///< reactor-ambient, W/K
    double ua_o_inf = 0.0;  ///< jacket-ambient, W/K
    double alpha_heater = 1.0;
    double p_max = 0.0;  ///< per heater, W
    double t_amb = 0.0;  ///< K
    double delta_hp = 0.0;  ///< heat of propagation magnitude, J/mol
    double m_conc0 = 0.0;   ///< initial monomer concentration, mol/L
    double v0 = 0.0;        ///< initial mixture volume, L

    void validate() const;
};

struct RateSet {
    double kd = 0.0;
    double kp = 0.0;
    double kt = 0.0;
    double kf = 0.0;
    double lambda0 = 0.0;     ///< total radical concentration, mol/L
    double d_free_vol = 1.0;  ///< free-volume factor D
    int iterations = 0;       ///< fixed-point iterations spent on kt
    bool used_bisection = false;
};

inline double arrhenius(double pre, double activation, double temperature)
{
    return pre * std::exp(-activation / (kGasConstant * temperature));
}

/// Volume contraction factor (rho_p - rho_m) / rho_p.
inline double volumetric_factor(double rho_p, double rho_m)
{
    detail::require(rho_p > 0.0 && rho_m > 0.0, "densities must be positive");
    return (rho_p - rho_m) / rho_p;
}

/// beta = f_s / (1 - f_s).
inline double solvent_ratio(double f_s)
{
    detail::require(f_s >= 0.0 && f_s < 1.0, "solvent fraction f_s must lie in [0, 1)");
    return f_s / (1.0 - f_s);
}

inline void PlantParams::validate() const
{
    using detail::require;
    require(kd0 > 0.0 && kp0_pre > 0.0 && kt0_pre > 0.0 && kf_pre > 0.0, "Arrhenius pre-factors must be positive");
    require(ed >= 0.0 && ep >= 0.0 && et >= 0.0 && ef >= 0.0, "activation energies must be non-negative");
    require(f > 0.0 && f <= 1.0, "initiator efficiency f must lie in (0, 1]");
    require(theta_p >= 0.0 && theta_t >= 0.0, "theta_p and theta_t must be non-negative");
    require(rho_m > 0.0 && rho_p > 0.0, "densities must be positive");
    require(rho_p > rho_m, "rho_p must exceed rho_m");
    require(f_s >= 0.0 && f_s < 1.0, "solvent fraction f_s must lie in [0, 1)");
    require(m0 > 0.0 && m_cp > 0.0 && mo_cpo > 0.0, "masses and heat capacities must be positive");
    require(ua_r > 0.0 && ua_inf > 0.0 && ua_o_inf > 0.0, "UA terms must be positive");
    require(alpha_heater > 0.0, "heater effectiveness must be positive");
    require(p_max > 0.0, "p_max must be positive");
    require(t_amb > 0.0, "ambient temperature must be > 0 K");
    require(delta_hp >= 0.0, "delta_hp is the exotherm magnitude and must be >= 0");
    require(m_conc0 > 0.0 && v0 > 0.0, "initial monomer concentration and volume must be positive");
}

/// Returns a message when the initial mixture volume implied by the monomer
/// charge, (m0 / rho_m)(1 + beta) in mL, differs from v0 by more than 1 %.
inline std::optional<std::string> check_volume_consistency(const PlantParams& p)
{
    const double implied_l = p.m0 / p.rho_m * (1.0 + solvent_ratio(p.f_s)) / 1000.0;
    const double rel = std::abs(implied_l - p.v0) / p.v0;
    if (rel <= 0.01)
        return std::nullopt;
    return "initial volume v0 = " + std::to_string(p.v0) + " L disagrees with (m0/rho_m)(1+beta) = " +
           std::to_string(implied_l) + " L by " + std::to_string(100.0 * rel) + " %";
}

/// Mixture volume (m0 / rho_m)(1 - eps x + beta) in cm^3.
inline double mixture_volume(double x, const PlantParams& p)
{
    detail::require(x >= 0.0 && x <= 1.0, "conversion x must lie in [0, 1]");
    const double eps = volumetric_factor(p.rho_p, p.rho_m);
    return p.m0 / p.rho_m * (1.0 - eps * x + solvent_ratio(p.f_s));
}

namespace detail {

inline double polymer_fraction_unchecked(double x, double eps, double beta)
{
    return x * (1.0 - eps) / (1.0 - eps * x + beta);
}

} // namespace detail

/// Volume fraction of polymer in the mixture: polymer volume m0 x / rho_p over
/// the shrinking mixture volume.
inline double polymer_volume_fraction(double x, const PlantParams& p)
{
    detail::require(x >= 0.0 && x <= 1.0, "conversion x must lie in [0, 1]");
    return detail::polymer_fraction_unchecked(x, volumetric_factor(p.rho_p, p.rho_m), solvent_ratio(p.f_s));
}

/// D = exp[(1 - phi_p) / (A + B (1 - phi_p))].
inline double free_volume_factor(double phi_p, double a, double b)
{
    const double free = 1.0 - phi_p;
    const double denom = a + b * free;
    if (!(denom > 0.0))
        throw InvalidParameter("CCS denominator A + B(1 - phi_p) must be positive");
    return std::exp(free / denom);
}

namespace detail {

inline constexpr int kCcsMaxIterations = 100;
inline constexpr double kCcsTolerance = 1e-12;
inline constexpr double kCcsDamping = 0.5;

// Termination constant kt solving 1/kt = 1/kt0 + theta_t sqrt(s / kt) / D with
// s = 2 f kd [I]. Damped fixed point first, bisection on the scalar residual if
// that stalls.
inline double solve_termination(double kt0, double s, double theta_over_d, int& iterations, bool& bisected)
{
    iterations = 0;
    bisected = false;
    if (s == 0.0 || theta_over_d == 0.0)
        return kt0;

    const auto target = [&](double kt) { return 1.0 / (1.0 / kt0 + theta_over_d * std::sqrt(s / kt)); };

    double kt = kt0;
    double residual = 0.0;
    for (int it = 1; it <= kCcsMaxIterations; ++it) {
        const double g = target(kt);
        residual = std::abs(g - kt) / kt;
        iterations = it;
        if (residual <= kCcsTolerance)
            return kt;
        kt = (1.0 - kCcsDamping) * kt + kCcsDamping * g;
    }

    // residual r(kt) is positive below the root and non-positive at kt0
    const auto r = [&](double k) { return 1.0 / k - 1.0 / kt0 - theta_over_d * std::sqrt(s / k); };
    bisected = true;
    double hi = kt0;
    double lo = kt0;
    for (int i = 0; i < 2000 && r(lo) <= 0.0; ++i)
        lo *= 0.5;
    if (!(r(lo) > 0.0))
        throw NumericError("CCS termination solve failed to bracket root; last relative residual " +
                           std::to_string(residual));
    for (int i = 0; i < 400 && (hi - lo) > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (r(mid) > 0.0 ? lo : hi) = mid;
    }
    const double root = 0.5 * (lo + hi);
    residual = std::abs(target(root) - root) / root;
    if (!(residual <= 1e3 * kCcsTolerance))
        throw NumericError("CCS termination solve did not converge; last relative residual " +
                           std::to_string(residual));
    return root;
}

} // namespace detail

/// Rate constants corrected for diffusion control at temperature T, initiator
/// concentration i_conc and polymer volume fraction phi_p.
inline RateSet ccs_rate_constants(double temperature, double i_conc, double phi_p, const PlantParams& p)
{
    detail::require(temperature > 0.0, "temperature must be > 0 K");
    detail::require(i_conc >= 0.0, "initiator concentration must be >= 0");
    detail::require(phi_p >= 0.0 && phi_p <= 1.0, "polymer volume fraction must lie in [0, 1]");

    RateSet r;
    r.kd = arrhenius(p.kd0, p.ed, temperature);
    r.kf = arrhenius(p.kf_pre, p.ef, temperature);
    const double kp0 = arrhenius(p.kp0_pre, p.ep, temperature);
    const double kt0 = arrhenius(p.kt0_pre, p.et, temperature);
    r.d_free_vol = free_volume_factor(phi_p, p.ccs_a, p.ccs_b);

    const double s = 2.0 * p.f * r.kd * i_conc;
    r.kt = detail::solve_termination(kt0, s, p.theta_t / r.d_free_vol, r.iterations, r.used_bisection);
    r.lambda0 = std::sqrt(s / r.kt);
    r.kp = 1.0 / (1.0 / kp0 + p.theta_p * r.lambda0 / r.d_free_vol);
    return r;
}

namespace detail {

// State derivative without domain checks; the Jacobian and the integrator
// stages evaluate slightly outside the physical box.
inline StateVector rhs(const StateVector& s, double power, const PlantParams& p)
{
    const double x = s[kConversion];
    const double i_conc = s[kInitiator];
    const double temp = s[kReactorTemp];
    const double temp_j = s[kJacketTemp];

    const double eps = (p.rho_p - p.rho_m) / p.rho_p;
    const double beta = p.f_s / (1.0 - p.f_s);
    const double phi_p = polymer_fraction_unchecked(x, eps, beta);

    RateSet k;
    k.kd = arrhenius(p.kd0, p.ed, temp);
    k.kf = arrhenius(p.kf_pre, p.ef, temp);
    const double kp0 = arrhenius(p.kp0_pre, p.ep, temp);
    const double kt0 = arrhenius(p.kt0_pre, p.et, temp);
    k.d_free_vol = free_volume_factor(phi_p, p.ccs_a, p.ccs_b);
    const double sq = 2.0 * p.f * k.kd * i_conc;
    if (sq > 0.0) {
        k.kt = solve_termination(kt0, sq, p.theta_t / k.d_free_vol, k.iterations, k.used_bisection);
        k.lambda0 = std::sqrt(sq / k.kt);
    } else {
        // sqrt of a negative concentration propagates as NaN for the caller to catch
        k.kt = kt0;
        k.lambda0 = sq == 0.0 ? 0.0 : std::sqrt(sq);
    }
    k.kp = 1.0 / (1.0 / kp0 + p.theta_p * k.lambda0 / k.d_free_vol);

    const double growth = (k.kp + k.kf) * (1.0 - x) * k.lambda0;

    StateVector d;
    d[kConversion] = growth;
    d[kInitiator] = -k.kd * i_conc + eps / (1.0 - eps * x + beta) * growth * i_conc;
    d[kReactorTemp] = (p.delta_hp * k.kp * p.v0 * p.m_conc0 * (1.0 - x) * k.lambda0 - p.ua_r * (temp - temp_j) -
                       p.ua_inf * (temp - p.t_amb)) /
                      p.m_cp;
    d[kJacketTemp] =
        (2.0 * p.alpha_heater * power + p.ua_r * (temp - temp_j) - p.ua_o_inf * (temp_j - p.t_amb)) / p.mo_cpo;
    return d;
}

} // namespace detail

/// Time derivative of (x, [I], T, Tj) under a per-heater power (two heaters).
inline StateVector derivatives(const ReactorState& state, double power, const PlantParams& p)
{
    validate(state);
    detail::require(power >= 0.0 && power <= p.p_max, "heater power must lie in [0, p_max]");
    return detail::rhs(state.to_vector(), power, p);
}

/// Heat released by propagation, W. Used to split the reactor energy balance.
inline double reaction_heat(const ReactorState& state, const PlantParams& p)
{
    validate(state);
    const RateSet k = ccs_rate_constants(state.t_reactor, state.i_conc, polymer_volume_fraction(state.x, p), p);
    return p.delta_hp * k.kp * p.v0 * p.m_conc0 * (1.0 - state.x) * k.lambda0;
}

} // namespace batchdmc
