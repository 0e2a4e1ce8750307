#pragma once

#include <stdexcept>
#include <string>

namespace llmfrac {

// Error taxonomy maps onto CLI exit codes and C API status codes:
// usage errors -> 1, data errors -> 2, transport errors -> 3.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class TransportError : public std::runtime_error {
public:
  explicit TransportError(const std::string& msg) : std::runtime_error(msg) {}
};

class UsageError : public std::runtime_error {
public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace llmfrac
