#include "mmscope/sample_model.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mmscope/errors.hpp"

namespace mmscope {

namespace {

using json = nlohmann::ordered_json;

constexpr char kMagic[4] = {'M', 'M', 'A', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; big-endian hosts unsupported");

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  fail(errc::parse_error,
       "line " + std::to_string(line_no) + ": " + what);
}

BBox bbox_from_json(const json& arr, std::size_t line_no) {
  if (!arr.is_array() || arr.size() != 4) {
    parse_fail(line_no, "bbox must be an array of 4 numbers");
  }
  BBox b{arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>(),
         arr[3].get<double>()};
  if (!b.valid()) {
    std::ostringstream os;
    os << "bbox [" << b.x_min << "," << b.y_min << "," << b.x_max << ","
       << b.y_max << "] has nonpositive extent";
    parse_fail(line_no, os.str());
  }
  return b;
}

json bbox_to_json(const BBox& b) {
  return json::array({b.x_min, b.y_min, b.x_max, b.y_max});
}

}  // namespace

const char* to_string(TokenKind k) {
  switch (k) {
    case TokenKind::CLS: return "CLS";
    case TokenKind::TEXT: return "TEXT";
    case TokenKind::LABEL: return "LABEL";
    case TokenKind::SEP: return "SEP";
    case TokenKind::VISUAL: return "VISUAL";
    case TokenKind::PAD: return "PAD";
  }
  return "?";
}

std::optional<TokenKind> token_kind_from(std::string_view s) {
  if (s == "CLS") return TokenKind::CLS;
  if (s == "TEXT") return TokenKind::TEXT;
  if (s == "LABEL") return TokenKind::LABEL;
  if (s == "SEP") return TokenKind::SEP;
  if (s == "VISUAL") return TokenKind::VISUAL;
  if (s == "PAD") return TokenKind::PAD;
  return std::nullopt;
}

const char* block_name(TokenKind k) {
  switch (k) {
    case TokenKind::CLS: return "cls";
    case TokenKind::TEXT: return "text";
    case TokenKind::LABEL: return "label";
    case TokenKind::SEP: return "sep";
    case TokenKind::VISUAL: return "vision";
    case TokenKind::PAD: return "pad";
  }
  return "?";
}

std::vector<int> InputLayout::positions_of(TokenKind k) const {
  std::vector<int> out;
  for (const TokenEntry& t : tokens) {
    if (t.kind == k) out.push_back(t.position);
  }
  return out;
}

std::size_t InputLayout::count_of(TokenKind k) const {
  std::size_t n = 0;
  for (const TokenEntry& t : tokens) {
    if (t.kind == k) ++n;
  }
  return n;
}

std::optional<int> InputLayout::sep_position() const {
  std::optional<int> pos;
  for (const TokenEntry& t : tokens) {
    if (t.kind == TokenKind::SEP) {
      if (pos.has_value()) return std::nullopt;  // ambiguous
      pos = t.position;
    }
  }
  return pos;
}

AttentionTensor load_attention(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io_error, "cannot open " + path.string());

  char magic[4];
  std::uint32_t header[5];  // version, L, H, S, S
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    fail(errc::malformed_header, "bad magic in " + path.string());
  }
  if (header[0] != kVersion) {
    fail(errc::malformed_header,
         "unsupported version " + std::to_string(header[0]));
  }
  const std::uint32_t l = header[1], h = header[2], s1 = header[3],
                      s2 = header[4];
  if (l == 0 || h == 0 || s1 == 0 || s1 != s2) {
    fail(errc::dim_mismatch, "header dims must be nonzero and square");
  }

  AttentionTensor t;
  t.layers = static_cast<int>(l);
  t.heads = static_cast<int>(h);
  t.seq = static_cast<int>(s1);
  const std::size_t count =
      static_cast<std::size_t>(l) * h * s1 * s2;
  t.values.resize(count);
  in.read(reinterpret_cast<char*>(t.values.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (in.gcount() !=
      static_cast<std::streamsize>(count * sizeof(float))) {
    fail(errc::dim_mismatch,
         "file holds fewer values than header declares");
  }
  if (in.peek() != std::ifstream::traits_type::eof()) {
    fail(errc::dim_mismatch,
         "file holds more values than header declares");
  }

  for (float v : t.values) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      fail(errc::non_stochastic_row,
           "attention value " + std::to_string(v) + " outside [0,1]");
    }
  }
  for (int li = 0; li < t.layers; ++li) {
    for (int hi = 0; hi < t.heads; ++hi) {
      for (int i = 0; i < t.seq; ++i) {
        double row_sum = 0.0;
        for (int j = 0; j < t.seq; ++j) row_sum += t.at(li, hi, i, j);
        if (std::fabs(row_sum - 1.0) > 1e-3) {
          std::ostringstream os;
          os << "row (layer " << li << ", head " << hi << ", query " << i
             << ") sums to " << row_sum;
          fail(errc::non_stochastic_row, os.str());
        }
      }
    }
  }
  return t;
}

void save_attention(const AttentionTensor& t,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(errc::io_error, "cannot write " + path.string());
  const std::uint32_t header[5] = {
      kVersion, static_cast<std::uint32_t>(t.layers),
      static_cast<std::uint32_t>(t.heads),
      static_cast<std::uint32_t>(t.seq),
      static_cast<std::uint32_t>(t.seq)};
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(t.values.data()),
            static_cast<std::streamsize>(t.values.size() * sizeof(float)));
  if (!out) fail(errc::io_error, "short write to " + path.string());
}

namespace {

Sample parse_sample_line(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    parse_fail(line_no, e.what());
  }
  if (!j.is_object()) parse_fail(line_no, "record is not an object");

  SampleRecord rec;
  InputLayout layout;
  try {
    rec.sample_id = j.at("sample_id").get<std::string>();

    const json& toks = j.at("layout");
    if (!toks.is_array()) parse_fail(line_no, "layout is not an array");
    int expected_pos = 0;
    for (const json& tj : toks) {
      TokenEntry e;
      e.position = tj.at("pos").get<int>();
      if (e.position != expected_pos) {
        parse_fail(line_no, "layout positions must be 0..n-1 in order");
      }
      ++expected_pos;
      const std::string kind_s = tj.at("kind").get<std::string>();
      const auto kind = token_kind_from(kind_s);
      if (!kind) parse_fail(line_no, "unknown token kind '" + kind_s + "'");
      e.kind = *kind;
      if (tj.contains("surface")) {
        e.surface = tj.at("surface").get<std::string>();
      }
      if (tj.contains("group_id") && !tj.at("group_id").is_null()) {
        e.group_id = tj.at("group_id").get<int>();
      }
      if (tj.contains("bbox") && !tj.at("bbox").is_null()) {
        e.bbox = bbox_from_json(tj.at("bbox"), line_no);
      }
      if (e.kind == TokenKind::VISUAL && !e.bbox.has_value()) {
        parse_fail(line_no, "VISUAL token at pos " +
                                std::to_string(e.position) +
                                " lacks a bbox");
      }
      layout.tokens.push_back(std::move(e));
    }

    if (j.contains("scene_captions")) {
      for (const json& c : j.at("scene_captions")) {
        rec.scene_captions.push_back(c.get<std::string>());
      }
    }
    if (j.contains("scene_type") && !j.at("scene_type").is_null()) {
      rec.scene_type = j.at("scene_type").get<std::string>();
    }
    if (j.contains("object_tags")) {
      for (const json& tag : j.at("object_tags")) {
        rec.object_tags.push_back(
            {tag.at("label").get<std::string>(),
             bbox_from_json(tag.at("bbox"), line_no)});
      }
    }
    if (j.contains("visual_boxes")) {
      for (const json& vb : j.at("visual_boxes")) {
        rec.visual_boxes.push_back(bbox_from_json(vb, line_no));
      }
    }
    if (j.contains("generated") && !j.at("generated").is_null()) {
      const json& g = j.at("generated");
      rec.generated = GeneratedCaption{
          g.at("caption").get<std::string>(),
          g.at("confidence").get<double>()};
    }
    if (j.contains("pooled_vector") && !j.at("pooled_vector").is_null()) {
      rec.pooled_vector = j.at("pooled_vector").get<std::vector<double>>();
    }
  } catch (const nlohmann::json::exception& e) {
    parse_fail(line_no, e.what());
  }

  const std::size_t n_visual = layout.count_of(TokenKind::VISUAL);
  if (rec.visual_boxes.size() != n_visual) {
    fail(errc::alignment_error,
         "line " + std::to_string(line_no) + ": record has " +
             std::to_string(rec.visual_boxes.size()) +
             " visual_boxes but layout has " + std::to_string(n_visual) +
             " VISUAL tokens");
  }
  return {std::move(rec), std::move(layout)};
}

}  // namespace

std::vector<Sample> load_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cannot open " + path.string());
  std::vector<Sample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    out.push_back(parse_sample_line(line, line_no));
  }
  return out;
}

void save_samples(const std::vector<Sample>& samples,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(errc::io_error, "cannot write " + path.string());
  for (const auto& [rec, layout] : samples) {
    json j;
    j["sample_id"] = rec.sample_id;
    json toks = json::array();
    for (const TokenEntry& e : layout.tokens) {
      json tj;
      tj["pos"] = e.position;
      tj["kind"] = to_string(e.kind);
      tj["surface"] = e.surface;
      if (e.group_id.has_value()) tj["group_id"] = *e.group_id;
      if (e.bbox.has_value()) tj["bbox"] = bbox_to_json(*e.bbox);
      toks.push_back(std::move(tj));
    }
    j["layout"] = std::move(toks);
    j["scene_captions"] = rec.scene_captions;
    if (rec.scene_type.has_value()) j["scene_type"] = *rec.scene_type;
    json tags = json::array();
    for (const ObjectTag& t : rec.object_tags) {
      tags.push_back({{"label", t.label}, {"bbox", bbox_to_json(t.bbox)}});
    }
    j["object_tags"] = std::move(tags);
    json boxes = json::array();
    for (const BBox& b : rec.visual_boxes) boxes.push_back(bbox_to_json(b));
    j["visual_boxes"] = std::move(boxes);
    if (rec.generated.has_value()) {
      j["generated"] = {{"caption", rec.generated->caption},
                        {"confidence", rec.generated->confidence}};
    }
    if (rec.pooled_vector.has_value()) {
      j["pooled_vector"] = *rec.pooled_vector;
    }
    out << j.dump() << '\n';
  }
  if (!out) fail(errc::io_error, "short write to " + path.string());
}

ValidationReport validate_sample(const AttentionTensor& t,
                                 const InputLayout& l) {
  ValidationReport rep;
  auto add = [&rep](const char* code, std::string msg) {
    rep.issues.push_back({code, std::move(msg)});
  };

  if (t.seq != l.seq_len()) {
    add("SeqLenMismatch", "tensor S=" + std::to_string(t.seq) +
                              " vs layout seq_len=" +
                              std::to_string(l.seq_len()));
  }

  const std::size_t n_sep = l.count_of(TokenKind::SEP);
  if (n_sep == 0) {
    add("MissingSep", "layout has no SEP token");
  } else if (n_sep > 1) {
    add("MultipleSep",
        "layout has " + std::to_string(n_sep) + " SEP tokens");
  }

  // PAD must form the tail of the text+label segment, i.e. no PAD may be
  // followed by TEXT or LABEL.
  bool pad_seen = false;
  for (const TokenEntry& e : l.tokens) {
    if (e.kind == TokenKind::PAD) {
      pad_seen = true;
    } else if (pad_seen &&
               (e.kind == TokenKind::TEXT || e.kind == TokenKind::LABEL)) {
      add("PadOutsideTail",
          "PAD precedes " + std::string(to_string(e.kind)) + " at pos " +
              std::to_string(e.position));
      break;
    }
  }

  for (const TokenEntry& e : l.tokens) {
    if (e.kind == TokenKind::VISUAL && !e.bbox.has_value()) {
      add("VisualBboxMissing",
          "VISUAL token at pos " + std::to_string(e.position) +
              " lacks a bbox");
    }
    if (e.bbox.has_value() && !e.bbox->valid()) {
      add("InvalidBbox",
          "token at pos " + std::to_string(e.position) +
              " has a degenerate bbox");
    }
  }

  for (float v : t.values) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      add("ValueOutOfRange", "attention value outside [0,1]");
      break;
    }
  }
  bool row_flagged = false;
  for (int li = 0; li < t.layers && !row_flagged; ++li) {
    for (int hi = 0; hi < t.heads && !row_flagged; ++hi) {
      for (int i = 0; i < t.seq && !row_flagged; ++i) {
        double row_sum = 0.0;
        for (int j = 0; j < t.seq; ++j) row_sum += t.at(li, hi, i, j);
        if (std::fabs(row_sum - 1.0) > 1e-3) {
          std::ostringstream os;
          os << "row (layer " << li << ", head " << hi << ", query " << i
             << ") sums to " << row_sum;
          add("NonStochasticRow", os.str());
          row_flagged = true;
        }
      }
    }
  }
  return rep;
}

}  // namespace mmscope
