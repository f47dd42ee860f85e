#pragma once

#include <stdexcept>
#include <string>

namespace collapse {

/// Invalid parameters or configuration values (sizes, rates, widths).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// API misuse: mismatched spaces, wrong factor kinds, out-of-range cells.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A numerical contract was violated (non-Hermitian generator, lost unitarity).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sampling from a state or weight set with zero total probability.
class DegenerateStateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A hypersurface step was requested for a cell whose causal past is not absorbed.
class OrderingError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace collapse
