// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace qegm {

/// Error categories, mapped one-to-one onto CLI exit codes.
enum class ErrorKind {
    Validation,  // bad inputs, shapes, config (exit 2)
    Numeric,     // non-finite values, degenerate math (exit 3)
    Io,          // file system and parse failures (exit 4)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

    int exit_code() const {
        switch (kind_) {
            case ErrorKind::Validation: return 2;
            case ErrorKind::Numeric: return 3;
            case ErrorKind::Io: return 4;
        }
        return 1;
    }

    static Error validation(const std::string& message) {
        return Error(ErrorKind::Validation, message);
    }
    static Error numeric(const std::string& message) {
        return Error(ErrorKind::Numeric, message);
    }
    static Error io(const std::string& message) {
        return Error(ErrorKind::Io, message);
    }

private:
    ErrorKind kind_;
};

}  // namespace qegm
