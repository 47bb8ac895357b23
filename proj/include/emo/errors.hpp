#pragma once

#include <stdexcept>
#include <string>

namespace emo {

/// Shape disagreement between tensor operands.
class dimension_error : public std::runtime_error {
public:
    explicit dimension_error(const std::string& what) : std::runtime_error(what) {}
};

/// Violated API precondition (empty input, out-of-vocab id, ...).
class contract_error : public std::runtime_error {
public:
    explicit contract_error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed external file (dataset, embedding, feature CSV, model).
class format_error : public std::runtime_error {
public:
    explicit format_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace emo
