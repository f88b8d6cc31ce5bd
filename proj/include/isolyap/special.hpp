#pragma once

namespace isolyap {

/// psi(x) for x > 0. Upward recurrence to x >= 10, then the asymptotic
/// series through the B_14 term; absolute error below 1e-13 for x >= 1/4.
double digamma(double x);

/// psi'(x) for x > 0, same scheme as digamma.
double trigamma(double x);

/// E[log X] for X ~ chi-square with k degrees of freedom: log 2 + psi(k/2).
double elog_chisq(int k);

/// Var[log X] for X ~ chi-square with k degrees of freedom: psi'(k/2).
double varlog_chisq(int k);

}  // namespace isolyap
