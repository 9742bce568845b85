#pragma once

// Trained head parameters in a sectioned text container:
//
//   head,channels=<C>,hidden=<h>,dim=<d>,pooling=<attention|mean>,ln_eps=<e>
//   tensor,<name>,rows=<r>,cols=<c>
//   <r lines of c comma-separated values>
//   ...
//
// Tensors appear in the order attn_w1, attn_b1, attn_w2, attn_b2, pred_w,
// pred_b, ln_gain, ln_bias; vectors are written as a single row.

#include <filesystem>
#include <iosfwd>
#include <string_view>

#include "trisim/pool_head.hpp"

namespace trisim {

void write_head_params(std::ostream& out, const HeadParams& p);
HeadParams read_head_params(std::istream& in, std::string_view source = "<stream>");
void save_head_params(const std::filesystem::path& path, const HeadParams& p);
HeadParams load_head_params(const std::filesystem::path& path);

}  // namespace trisim
