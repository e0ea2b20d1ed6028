#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tracejudge/agreement.hpp"

// Independent reference computations. Each one works from the textbook definition by
// direct enumeration and shares no code with the library.
namespace tj_test::oracle {

/// Krippendorff ordinal alpha by enumerating every ordered pair of pairable values, with the
/// ordinal distance built from category marginals of the pairable values.
std::optional<double> krippendorff_ordinal(const tracejudge::RatingMatrix& m);

std::optional<double> cohen_kappa(std::span<const int> a, std::span<const int> b);

/// ICC(3,1) from the two-way ANOVA mean squares, summed cell by cell.
std::optional<double> icc31(const tracejudge::RatingMatrix& m);

struct PairedT {
  double t = 0.0;
  double p = 0.0;
  double d = 0.0;
};

/// Textbook paired t; the two-sided p comes from a continued-fraction incomplete beta.
PairedT paired_t(std::span<const double> a, std::span<const double> b);

/// Two-sided Student-t tail probability P(|T| > |t|).
double student_t_two_sided(double t, double df);

/// Ranks counted pairwise (ties averaged), then the Pearson formula on raw sums.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

/// log(s2) + e^2 / s2, with s2 the mean of the squared returns at t and up to 21 days before.
std::vector<double> qlike(std::span<const double> errors, std::span<const double> returns);

/// Long-run variance of a stationary AR(1) with innovation sd `sigma`.
double ar1_long_run_variance(double phi, double sigma);

}  // namespace tj_test::oracle
