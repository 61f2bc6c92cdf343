#pragma once

#include <functional>
#include <random>
#include <vector>

#include "doctest.h"
#include "otrom/error.hpp"

namespace otrom::test {

inline ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an otrom::Error");
    return ErrorCode::InvalidArgument;
}

#define CHECK_CODE(expr, expected) CHECK(::otrom::test::code_of([&] { (void)(expr); }) == (expected))

inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& v : w) s += (v = u(rng));
    for (auto& v : w) v /= s;
    return w;
}

}  // namespace otrom::test
