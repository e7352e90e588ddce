#pragma once

#include <Eigen/Dense>
#include <vector>

namespace gppm {

double mean(const Eigen::VectorXd& v);
// Sample variance (n-1 denominator); 0 for n < 2.
double variance(const Eigen::VectorXd& v);

// Linear-interpolation quantile on the sorted sample (R type 7). q in [0, 1].
double quantile(std::vector<double> v, double q);
double quantile(const Eigen::VectorXd& v, double q);
double median(const std::vector<double>& v);
double median(const Eigen::VectorXd& v);

double pearson_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
// Autocorrelation at the given lag, mean-centered, normalized by lag-0.
double lag_autocorrelation(const Eigen::VectorXd& v, int lag);

double normal_cdf(double x);

// Numerically stable logistic function.
double invlogit(double x);

}  // namespace gppm
