#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace gapfolio {

// Stable error taxonomy; the CLI maps categories to exit codes
// (validation -> 2, numerical -> 3, io -> 4).
enum class ErrorCategory { validation, numerical, io };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message),
          category_(category),
          kind_(std::move(kind)) {}

    ErrorCategory category() const noexcept { return category_; }
    // Machine-checkable tag, e.g. "ParameterOrdering", "PicardDivergence".
    const std::string& kind() const noexcept { return kind_; }

    static Error validation(std::string kind, const std::string& message) {
        return Error(ErrorCategory::validation, std::move(kind), message);
    }
    static Error numerical(std::string kind, const std::string& message) {
        return Error(ErrorCategory::numerical, std::move(kind), message);
    }
    static Error io(std::string kind, const std::string& message) {
        return Error(ErrorCategory::io, std::move(kind), message);
    }

private:
    ErrorCategory category_;
    std::string kind_;
};

inline int exit_code_for(ErrorCategory category) noexcept {
    switch (category) {
        case ErrorCategory::validation: return 2;
        case ErrorCategory::numerical: return 3;
        case ErrorCategory::io: return 4;
    }
    return 1;
}

}  // namespace gapfolio
