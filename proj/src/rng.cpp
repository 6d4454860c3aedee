#include "habench/rng.hpp"

#include <cmath>

namespace habench {

double Substream::next_normal() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace habench
