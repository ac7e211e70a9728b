#include "coopseg/spec_io.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "coopseg/error.hpp"

COOPSEG_NAMESPACE_BEGIN

namespace {

int parse_int(const std::string& tok, int line) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("spec line " + std::to_string(line) + ": '" + tok + "' is not an integer");
  }
}

}  // namespace

std::string format_spec(const NetworkSpec& spec) {
  std::ostringstream os;
  os << "in_channels " << spec.in_channels << '\n';
  os << "num_classes " << spec.num_classes << '\n';
  for (const auto& b : spec.blocks) {
    os << b.name << ' ';
    if (const auto* c = std::get_if<ConvRelu>(&b.kind)) {
      os << "conv " << c->out_channels << ' ' << c->kernel << ' ' << c->padding;
    } else if (const auto* p = std::get_if<Pool>(&b.kind)) {
      os << "pool " << p->k;
    } else if (const auto* u = std::get_if<Upsample>(&b.kind)) {
      os << "upsample " << u->factor;
    } else {
      os << "head " << std::get<Head>(b.kind).num_classes;
    }
    os << '\n';
  }
  return os.str();
}

NetworkSpec parse_spec(const std::string& text) {
  NetworkSpec spec;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  bool have_in = false, have_k = false;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    auto need = [&](std::size_t n) {
      if (tok.size() != n) {
        throw ConfigError("spec line " + std::to_string(line) + ": expected " + std::to_string(n) +
                          " fields, got " + std::to_string(tok.size()));
      }
    };
    if (tok[0] == "in_channels") {
      need(2);
      spec.in_channels = parse_int(tok[1], line);
      have_in = true;
      continue;
    }
    if (tok[0] == "num_classes") {
      need(2);
      spec.num_classes = parse_int(tok[1], line);
      have_k = true;
      continue;
    }
    if (tok.size() < 2) throw ConfigError("spec line " + std::to_string(line) + ": missing block kind");
    const std::string& kind = tok[1];
    if (kind == "conv") {
      need(5);
      spec.blocks.push_back({tok[0], ConvRelu{parse_int(tok[2], line), parse_int(tok[3], line),
                                              parse_int(tok[4], line)}});
    } else if (kind == "pool") {
      need(3);
      spec.blocks.push_back({tok[0], Pool{parse_int(tok[2], line)}});
    } else if (kind == "upsample") {
      need(3);
      spec.blocks.push_back({tok[0], Upsample{parse_int(tok[2], line)}});
    } else if (kind == "head") {
      need(3);
      spec.blocks.push_back({tok[0], Head{parse_int(tok[2], line)}});
    } else {
      throw ConfigError("spec line " + std::to_string(line) + ": unknown block kind '" + kind + "'");
    }
  }
  if (!have_in) throw ConfigError("spec: missing in_channels");
  if (!have_k) throw ConfigError("spec: missing num_classes");
  spec.validate();
  return spec;
}

NetworkSpec load_spec_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open spec file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_spec(ss.str());
}

COOPSEG_NAMESPACE_END
