#pragma once

#include "ragcap/model.hpp"

namespace ragcap::detail {

double gelu_activation(double z);
double gelu_activation_grad(double z);
Matrix layer_norm_forward(const Matrix& x, const LayerNormParams& p,
                          Matrix* norm_out, Vector* rstd_out);

}  // namespace ragcap::detail
