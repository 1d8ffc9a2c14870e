#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mosaic {

// Raised when a config fails validation. Carries every violation found,
// not just the first one.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> issues)
        : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

    const std::vector<std::string>& issues() const { return issues_; }

private:
    static std::string join(const std::vector<std::string>& issues) {
        std::string out = "config validation failed:";
        for (const auto& s : issues) {
            out += "\n  - ";
            out += s;
        }
        return out;
    }

    std::vector<std::string> issues_;
};

// Non-finite values or broken internal caches during inference.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mosaic
