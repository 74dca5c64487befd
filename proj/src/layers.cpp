#include "srender/layers.hpp"

namespace srender {

void fill_normal(Tensor& t, Rng& rng, double stddev) {
  for (double& v : t.values()) v = rng.normal(0.0, stddev);
}

Conv2d::Conv2d(const std::string& name, int in, int out, int kernel, int stride_, int pad_, Rng& rng,
               double init_std)
    : weight(name + ".weight", Tensor({out, in, kernel, kernel})),
      bias(name + ".bias", Tensor({out})),
      stride(stride_),
      pad(pad_) {
  fill_normal(weight.value, rng, init_std);
}

Var Conv2d::operator()(Tape& tape, Var x, bool track) {
  return conv2d(x, tape.parameter(weight, track), tape.parameter(bias, track), stride, pad);
}

ConvTranspose2d::ConvTranspose2d(const std::string& name, int in, int out, int kernel, int stride_, int pad_,
                                 int output_pad_, Rng& rng, double init_std)
    : weight(name + ".weight", Tensor({in, out, kernel, kernel})),
      bias(name + ".bias", Tensor({out})),
      stride(stride_),
      pad(pad_),
      output_pad(output_pad_) {
  fill_normal(weight.value, rng, init_std);
}

Var ConvTranspose2d::operator()(Tape& tape, Var x, bool track) {
  return conv_transpose2d(x, tape.parameter(weight, track), tape.parameter(bias, track), stride, pad, output_pad);
}

Linear::Linear(const std::string& name, int in, int out, Rng& rng, double init_std)
    : weight(name + ".weight", Tensor({out, in})), bias(name + ".bias", Tensor({out})) {
  fill_normal(weight.value, rng, init_std);
}

Var Linear::operator()(Tape& tape, Var x, bool track) {
  return linear(x, tape.parameter(weight, track), tape.parameter(bias, track));
}

}  // namespace srender
