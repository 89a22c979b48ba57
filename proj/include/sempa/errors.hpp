#pragma once

#include <stdexcept>
#include <string>

namespace sempa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Assignment is not a set partition of 0..K-1 into blocks of size M.
class PartitionError : public Error {
 public:
  using Error::Error;
};

/// K is not a multiple of M.
class DivisibilityError : public Error {
 public:
  using Error::Error;
};

class ProviderError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ZeroNormError : public Error {
 public:
  using Error::Error;
};

/// An enumeration (packet subsets or partitions) would exceed its configured guard.
class EnumerationLimitError : public Error {
 public:
  using Error::Error;
};

/// Mutation requested on a group with a single packet.
class DegenerateGroupError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sempa
