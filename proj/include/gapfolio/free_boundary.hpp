#pragma once

#include <vector>

#include "gapfolio/dual_transform.hpp"
#include "gapfolio/market.hpp"
#include "gapfolio/pde_core.hpp"

namespace gapfolio {

// Free boundaries of the three-region policy. In the dual log variable the
// borrowing boundary b(s) is the unique zero of I2 = w + a2 w_z and the
// saving boundary l(s) the unique zero of I1 = w + a1 w_z, with l <= b.
// Mapping through u gives the wealth-space curves B(t) = -u(e^{b(s)}, t),
// L(t) = -u(e^{l(s)}, t) with s = T - t.
struct BoundaryCurves {
    std::vector<double> s_nodes;  // ascending, includes the s = 0 limit level
    std::vector<double> b, l;     // dual log boundaries per level
    std::vector<double> t_nodes;  // ascending calendar time (filled by map_to_wealth)
    std::vector<double> B, L;     // wealth boundaries per t node
};

// Scans every solver level including s = 0 (where the exact initial data
// gives b = ln(2d) - ln(1+a2), l = ln(2d) - ln(1+a1) as the interpolated
// zeros). Throws numerical "MultipleCrossings" if an indicator changes sign
// more than once on the usable window and "BoundaryAtEdge" if a zero sits
// within two cells of the truncation window.
BoundaryCurves extract_z_boundaries(const WSolution& sol, const DerivedConstants& c);

void map_to_wealth(BoundaryCurves& bc, const DualSurface& ds);

// Closed-form envelopes for the dual boundaries at remaining horizon s.
// Two lower envelopes for l circulate with the roles of (theta, r) swapped
// between statement and derivation; both are reported and the binding one is
// their minimum.
struct BoundaryEnvelopes {
    double b_upper = 0.0;
    double l_lower_statement = 0.0;
    double l_lower_proof = 0.0;
    double l_lower() const { return l_lower_statement < l_lower_proof ? l_lower_statement : l_lower_proof; }
};
BoundaryEnvelopes boundary_envelopes(const DerivedConstants& c, const MarketParams& p, double s);

double b_initial_limit(const DerivedConstants& c, const MarketParams& p);  // ln(2d) - ln(1+a2)
double l_initial_limit(const DerivedConstants& c, const MarketParams& p);  // ln(2d) - ln(1+a1)
double terminal_B(const MarketParams& p);  // a2 d / (1 + a2)
double terminal_L(const MarketParams& p);  // a1 d / (1 + a1)

}  // namespace gapfolio
