#pragma once

// Reference values computed independently of the library (40-digit
// arithmetic, exact fractions for the portfolio tables) and frozen here.

#include <array>

namespace oracles {

// Uniform sample used by the risk-function tables.
inline constexpr std::array<double, 5> kSample{0.3, -1.2, 2.5, 0.0, 1.1};

// mean-deviation, beta = 0.5
inline constexpr double kMeanDevValue = 1.1536774397026504;
inline constexpr std::array<double, 5> kMeanDevDerivative{0.90222876690876519, 0.29115856008854785,
                                                          1.798465070245084, 0.78001472554472173,
                                                          1.2281328772128812};

// smoothed semideviation, beta = 0.5, eps = 0.1
inline constexpr double kSemidevValue = 0.79295033638205858;
inline constexpr std::array<double, 5> kSemidevDerivative{0.83318787280382323, 0.79160153843227787,
                                                          1.2916015230194222, 0.79384966113733269,
                                                          1.2897594046071441};

// entropic, theta = 1 and theta = 2
inline constexpr double kEntropic1Value = 1.2718770116647951;
inline constexpr std::array<double, 5> kEntropic1Derivative{0.37837216218885622, 0.084426241144907155,
                                                            3.4148138715645042, 0.28030499194824282,
                                                            0.84208273315348969};
inline constexpr double kEntropic2Value = 1.7339636541943275;
inline constexpr std::array<double, 5> kEntropic2Derivative{0.056816567844256115, 0.0028287303476893593,
                                                            4.6277588054767556, 0.031181593555853451,
                                                            0.28141430277544538};

// Two-step binary tree, dt = 0.5, increments +-sqrt(0.5); D on the leaves
// (++, +-, -+, --) = (1.6, 0.8, 1.0, 0.6). Branch averages by enumeration.
inline constexpr std::array<double, 4> kTreeD{1.6, 0.8, 1.0, 0.6};
inline constexpr double kTreeYpUp = 1.2;
inline constexpr double kTreeYpDown = 0.8;
inline constexpr double kTreeZpUp = 0.56568542494923801;
inline constexpr double kTreeZpDown = 0.28284271247461901;
inline constexpr double kTreeYp0 = 1.0;
inline constexpr double kTreeZp0 = 0.28284271247461901;

// Portfolio Hamiltonian, sigma = 0.2, y = -1, y' = 1, z = 0.3, phi = 0.5:
// -(0.02 + 0.03 - 0.005) + 0.3 * 0.1.
inline constexpr double kPortfolioHamiltonian = -0.015;

// Defaults r = 0.02, mu = 0.08, sigma = 0.3, T = 1, x0 = 0 on the 31-point
// grid over [0.1, 1.5].
inline constexpr double kMerton = 0.66666666666666663;

inline constexpr std::array<double, 31> kEntropicTable{
    -0.025100000000000001, -0.026863999999999999, -0.028236000000000001, -0.029215999999999999,
    -0.029804000000000001, -0.029999999999999999, -0.029804000000000001, -0.029215999999999999,
    -0.028236000000000001, -0.026863999999999999, -0.025100000000000001, -0.022943999999999999,
    -0.020396000000000001, -0.017455999999999999, -0.014123999999999999, -0.0104,
    -0.0062839999999999997, -0.001776, 0.003124, 0.0084159999999999999,
    0.0141, 0.020175999999999999, 0.026644000000000001, 0.033503999999999999,
    0.040756000000000001, 0.048399999999999999, 0.056436, 0.064864000000000005,
    0.073683999999999999, 0.082895999999999997, 0.092499999999999999};

inline constexpr std::array<double, 31> kExpectationTable{
    -0.02555, -0.027831999999999999, -0.029918, -0.031808000000000003,
    -0.033501999999999997, -0.035000000000000003, -0.036302000000000001, -0.037407999999999997,
    -0.038317999999999998, -0.039031999999999997, -0.039550000000000002, -0.039871999999999998,
    -0.039997999999999999, -0.039927999999999998, -0.039662000000000003, -0.039199999999999999,
    -0.038542, -0.037687999999999999, -0.036637999999999997, -0.035392,
    -0.033950000000000001, -0.032312, -0.030478000000000002, -0.028448000000000001,
    -0.026221999999999999, -0.023800000000000002, -0.021181999999999999, -0.018367999999999999,
    -0.015358, -0.012152, -0.0087500000000000008};

}  // namespace oracles
