#include "mmscope/errors.hpp"

namespace mmscope {

const char* errc_name(errc c) {
  switch (c) {
    case errc::malformed_header: return "MalformedHeader";
    case errc::dim_mismatch: return "DimMismatch";
    case errc::non_stochastic_row: return "NonStochasticRow";
    case errc::parse_error: return "ParseError";
    case errc::alignment_error: return "AlignmentError";
    case errc::invalid_spec: return "InvalidSpec";
    case errc::layer_out_of_range: return "LayerOutOfRange";
    case errc::empty_block: return "EmptyBlock";
    case errc::no_labels: return "NoLabels";
    case errc::missing_sep: return "MissingSep";
    case errc::list_too_short: return "ListTooShort";
    case errc::bad_p: return "BadP";
    case errc::unknown_scene: return "UnknownScene";
    case errc::key_mismatch: return "KeyMismatch";
    case errc::degenerate_input: return "DegenerateInput";
    case errc::empty_corpus: return "EmptyCorpus";
    case errc::no_unchanged_pairs: return "NoUnchangedPairs";
    case errc::empty_input: return "EmptyInput";
    case errc::missing_vector: return "MissingVector";
    case errc::missing_label: return "MissingLabel";
    case errc::single_class: return "SingleClass";
    case errc::degenerate_samples: return "DegenerateSamples";
    case errc::too_few_samples: return "TooFewSamples";
    case errc::unsupported_format: return "UnsupportedFormat";
    case errc::io_error: return "IoError";
    case errc::invalid_input: return "InvalidInput";
  }
  return "UnknownError";
}

}  // namespace mmscope
