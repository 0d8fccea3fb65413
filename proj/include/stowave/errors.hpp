#ifndef STOWAVE_ERRORS_HPP
#define STOWAVE_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stowave {

/// A model hypothesis (H.1, H.2, H.3, (D), deviation scale, domain size) does not hold.
class HypothesisError : public std::invalid_argument {
public:
    HypothesisError(std::string hypothesis, const std::string& what)
        : std::invalid_argument(hypothesis + ": " + what), hypothesis_(std::move(hypothesis)) {}

    [[nodiscard]] const std::string& hypothesis() const noexcept { return hypothesis_; }

private:
    std::string hypothesis_;
};

/// Time marching produced non-finite values.
class BlowUpError : public std::runtime_error {
public:
    explicit BlowUpError(std::size_t step)
        : std::runtime_error("numerical blow-up (non-finite values) at step " + std::to_string(step)),
          step_(step) {}

    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

} // namespace stowave

#endif
