#pragma once

#include <string>
#include <vector>

namespace fbsde {

// One verified inequality: lhs <= rhs, where rhs was computed with the named
// closed-form constant.
struct InequalityCheck {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double constant = 0.0;
    bool pass = false;

    double margin() const { return rhs - lhs; }
};

}  // namespace fbsde
