#pragma once

#include <functional>

namespace evnet {

// Adaptive Simpson integration of f on [a, b] to the given absolute
// tolerance. Throws std::runtime_error when the recursion depth limit is
// reached before the tolerance is met.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double abs_tol, int max_depth = 60);

}  // namespace evnet
