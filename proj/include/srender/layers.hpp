#pragma once

#include <string>
#include <vector>

#include "srender/autograd.hpp"
#include "srender/rng.hpp"

namespace srender {

struct Conv2d {
  Parameter weight;  // (out, in, k, k)
  Parameter bias;    // (out)
  int stride = 1;
  int pad = 0;

  Conv2d() = default;
  Conv2d(const std::string& name, int in, int out, int kernel, int stride, int pad, Rng& rng, double init_std);

  Var operator()(Tape& tape, Var x, bool track);
  int in_channels() const { return weight.value.dim(1); }
  int out_channels() const { return weight.value.dim(0); }
  int kernel() const { return weight.value.dim(2); }
};

struct ConvTranspose2d {
  Parameter weight;  // (in, out, k, k)
  Parameter bias;    // (out)
  int stride = 1;
  int pad = 0;
  int output_pad = 0;

  ConvTranspose2d() = default;
  ConvTranspose2d(const std::string& name, int in, int out, int kernel, int stride, int pad, int output_pad,
                  Rng& rng, double init_std);

  Var operator()(Tape& tape, Var x, bool track);
  int in_channels() const { return weight.value.dim(0); }
  int out_channels() const { return weight.value.dim(1); }
};

struct Linear {
  Parameter weight;  // (out, in)
  Parameter bias;    // (out)

  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& rng, double init_std);

  Var operator()(Tape& tape, Var x, bool track);
};

void fill_normal(Tensor& t, Rng& rng, double stddev);

}  // namespace srender
