#include "srender/tensor.hpp"

#include <cstring>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "srender/error.hpp"

namespace srender {

namespace {

std::size_t element_count(const std::vector<int>& dims) {
  std::size_t n = 1;
  for (int d : dims) {
    if (d < 0) throw Error(Errc::BadShape, "negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> dims, double fill)
    : dims_(std::move(dims)), data_(element_count(dims_), fill) {}

Tensor::Tensor(std::vector<int> dims, std::vector<double> values)
    : dims_(std::move(dims)), data_(values.begin(), values.end()) {
  if (data_.size() != element_count(dims_)) {
    throw Error(Errc::BadShape, "value count does not match dimensions " + shape_string());
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!same_shape(other)) {
    throw Error(Errc::ShapeMismatch, shape_string() + " += " + other.shape_string());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims_[i]);
  }
  return s + "]";
}

bool bit_identical(const Tensor& a, const Tensor& b) noexcept {
  return a.dims() == b.dims() &&
         (a.size() == 0 || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidImage: return "InvalidImage";
    case Errc::CoincidentLandmarks: return "CoincidentLandmarks";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::BadConfig: return "BadConfig";
    case Errc::OddDimensions: return "OddDimensions";
    case Errc::UnknownOperator: return "UnknownOperator";
    case Errc::WrongDomainTag: return "WrongDomainTag";
    case Errc::BadShape: return "BadShape";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NegativeWeight: return "NegativeWeight";
    case Errc::PsiNotFrozen: return "PsiNotFrozen";
    case Errc::DegenerateDataset: return "DegenerateDataset";
    case Errc::EpochOutOfRange: return "EpochOutOfRange";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::FingerprintMismatch: return "FingerprintMismatch";
    case Errc::PatchTooLarge: return "PatchTooLarge";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptySet: return "EmptySet";
    case Errc::TooFewIdentities: return "TooFewIdentities";
    case Errc::UnknownProbeId: return "UnknownProbeId";
    case Errc::ParseError: return "ParseError";
    case Errc::UnknownKey: return "UnknownKey";
    case Errc::UnknownCommand: return "UnknownCommand";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace srender
