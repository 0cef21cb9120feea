#pragma once

#include <stdexcept>
#include <string>

namespace moseq {

// Malformed input data: CoNLL text, tag strings, misaligned files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Model files and numeric state: corrupt bundles, version mismatch, NaN.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or arguments.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace moseq
