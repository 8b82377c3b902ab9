#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vtw {

// Base for all operational errors raised by this library. Data-path decode
// failures (corrupt wire frames, unreadable fiducials) are reported through
// status enums instead; see wire.hpp and fiducial.hpp.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TaxelOutOfRange : Error {
  using Error::Error;
};

struct InvalidSpec : Error {
  using Error::Error;
};

struct TooFewSamples : Error {
  using Error::Error;
};

struct DegenerateFit : Error {
  using Error::Error;
};

struct UnsortedInput : Error {
  using Error::Error;
};

struct PadMismatch : Error {
  using Error::Error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};

struct BadStep : Error {
  using Error::Error;
};

struct DenoiseAborted : Error {
  DenoiseAborted(int step_, const std::string& what)
      : Error("denoise aborted at step " + std::to_string(step_) + ": " + what), step(step_) {}
  int step;
};

// File container errors.
struct IoFailure : Error {
  using Error::Error;
};

struct BadMagic : Error {
  using Error::Error;
};

struct BadFileVersion : Error {
  using Error::Error;
};

struct TruncatedFile : Error {
  TruncatedFile(std::uint64_t offset_, const std::string& what)
      : Error(what + " (at byte offset " + std::to_string(offset_) + ")"), offset(offset_) {}
  std::uint64_t offset;
};

struct CountMismatch : Error {
  using Error::Error;
};

}  // namespace vtw
