#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace inclass {

// Base class for all library errors.
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

class dimension_error : public error {
public:
    explicit dimension_error(const std::string& msg) : error(msg) {}
};

class invalid_input_error : public error {
public:
    explicit invalid_input_error(const std::string& msg) : error(msg) {}
};

class config_error : public error {
public:
    explicit config_error(const std::string& msg) : error(msg) {}
};

// Bad cell / malformed file while reading a dataset.
class ingestion_error : public error {
public:
    ingestion_error(const std::string& msg, std::size_t row, std::size_t col)
        : error(msg + " (row " + std::to_string(row) + ", column " + std::to_string(col) + ")"),
          row_(row), col_(col) {}
    explicit ingestion_error(const std::string& msg) : error(msg), row_(0), col_(0) {}
    std::size_t row() const { return row_; }
    std::size_t col() const { return col_; }

private:
    std::size_t row_, col_;
};

class io_error : public error {
public:
    explicit io_error(const std::string& msg) : error(msg) {}
};

// Non-finite gradient fed to the optimizer; carries the offending index.
class optimizer_error : public error {
public:
    optimizer_error(const std::string& msg, std::size_t index)
        : error(msg + " (parameter index " + std::to_string(index) + ")"), index_(index) {}
    std::size_t index() const { return index_; }

private:
    std::size_t index_;
};

// A pseudo weight fell below the configured floor; carries (component, variate).
class degenerate_component_error : public error {
public:
    degenerate_component_error(const std::string& msg, std::size_t component, std::size_t variate)
        : error(msg + " (component " + std::to_string(component) + ", variate " +
                std::to_string(variate) + ")"),
          component_(component), variate_(variate) {}
    std::size_t component() const { return component_; }
    std::size_t variate() const { return variate_; }

private:
    std::size_t component_, variate_;
};

class numeric_error : public error {
public:
    explicit numeric_error(const std::string& msg) : error(msg) {}
};

// Classifier oracle asked for a point where every component density vanishes.
class undefined_point_error : public error {
public:
    explicit undefined_point_error(const std::string& msg) : error(msg) {}
};

class estimator_error : public error {
public:
    explicit estimator_error(const std::string& msg) : error(msg) {}
};

} // namespace inclass
