#pragma once

#include <stdexcept>
#include <string>

namespace mmscope {

// Error codes mirror the per-operation contracts; the CLI maps any of
// these to exit code 2 (data error).
enum class errc {
  malformed_header,
  dim_mismatch,
  non_stochastic_row,
  parse_error,
  alignment_error,
  invalid_spec,
  layer_out_of_range,
  empty_block,
  no_labels,
  missing_sep,
  list_too_short,
  bad_p,
  unknown_scene,
  key_mismatch,
  degenerate_input,
  empty_corpus,
  no_unchanged_pairs,
  empty_input,
  missing_vector,
  missing_label,
  single_class,
  degenerate_samples,
  too_few_samples,
  unsupported_format,
  io_error,
  invalid_input,
};

const char* errc_name(errc c);

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg),
        code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace mmscope
