#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include "pertlab/errors.hpp"
#include "pertlab/model.hpp"

namespace pertlab {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream is{std::string(s)};
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

struct RawLine {
  int number;
  std::string text;
};

// Sections: name -> lines (the remainder after "name:" counts as a line too).
struct RawDocument {
  std::map<std::string, std::vector<RawLine>> sections;
  std::map<std::string, int> header_line;
};

RawDocument split_sections(std::string_view text, const std::string& source) {
  static const char* known[] = {"states", "zeta", "eta", "pi", "rates", "support"};
  RawDocument doc;
  std::string current;
  int number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++number;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto colon = line.find(':');
    if (colon != std::string_view::npos) {
      const std::string key{trim(line.substr(0, colon))};
      bool is_key = false;
      for (const char* k : known) is_key = is_key || key == k;
      if (is_key) {
        if (doc.header_line.count(key)) throw ParseError(source, number, "section '" + key + "' repeated");
        current = key;
        doc.header_line[key] = number;
        doc.sections[key];
        const auto rest = trim(line.substr(colon + 1));
        if (!rest.empty()) doc.sections[key].push_back({number, std::string(rest)});
        continue;
      }
    }
    if (current.empty()) throw ParseError(source, number, "content before any section header");
    doc.sections[current].push_back({number, std::string(line)});
  }
  return doc;
}

double parse_double(const std::string& tok, const std::string& source, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(source, line, "expected a number, got '" + tok + "'");
  }
}

int parse_int(const std::string& tok, const std::string& source, int line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw ParseError(source, line, "expected an integer, got '" + tok + "'");
  return v;
}

const std::vector<RawLine>& require(const RawDocument& doc, const std::string& key,
                                    const std::string& source) {
  auto it = doc.sections.find(key);
  if (it == doc.sections.end()) throw ParseError(source, 0, "missing section '" + key + "'");
  return it->second;
}

std::vector<std::string> parse_states(const RawDocument& doc, const std::string& source) {
  std::vector<std::string> labels;
  for (const RawLine& l : require(doc, "states", source))
    for (auto& t : split_ws(l.text)) labels.push_back(std::move(t));
  if (labels.empty()) throw ParseError(source, doc.header_line.at("states"), "no states listed");
  return labels;
}

int label_index(const std::vector<std::string>& labels, const std::string& tok,
                const std::string& source, int line) {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == tok) return static_cast<int>(i);
  throw ParseError(source, line, "unknown state '" + tok + "'");
}

// Per-state values given either as `label=value` tokens or positionally.
template <class T, class Parse>
std::vector<T> parse_per_state(const RawDocument& doc, const std::string& key,
                               const std::vector<std::string>& labels, const std::string& source,
                               Parse parse) {
  std::vector<std::optional<T>> values(labels.size());
  std::size_t positional = 0;
  bool keyed = false;
  int last_line = doc.header_line.count(key) ? doc.header_line.at(key) : 0;
  for (const RawLine& l : require(doc, key, source)) {
    last_line = l.number;
    for (const auto& tok : split_ws(l.text)) {
      const auto eq = tok.find('=');
      if (eq != std::string::npos) {
        keyed = true;
        const int s = label_index(labels, tok.substr(0, eq), source, l.number);
        if (values[static_cast<std::size_t>(s)])
          throw ParseError(source, l.number, key + ": state '" + labels[static_cast<std::size_t>(s)] + "' given twice");
        values[static_cast<std::size_t>(s)] = parse(tok.substr(eq + 1), source, l.number);
      } else {
        if (keyed) throw ParseError(source, l.number, key + ": cannot mix positional and label=value entries");
        if (positional >= labels.size()) throw ParseError(source, l.number, key + ": too many values");
        values[positional++] = parse(tok, source, l.number);
      }
    }
  }
  std::vector<T> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!values[i]) throw ParseError(source, last_line, key + ": no value for state '" + labels[i] + "'");
    out.push_back(*values[i]);
  }
  return out;
}

struct ParsedRow {
  int a, b, c, d;
  std::optional<double> rate;
};

ParsedRow parse_row(const RawLine& l, const std::vector<std::string>& labels,
                    const std::string& source, bool want_rate) {
  std::string body = l.text;
  std::optional<double> rate;
  if (const auto colon = body.find(':'); colon != std::string::npos) {
    if (!want_rate) throw ParseError(source, l.number, "support rows carry no rate");
    rate = parse_double(std::string(trim(std::string_view(body).substr(colon + 1))), source, l.number);
    body = body.substr(0, colon);
  } else if (want_rate) {
    throw ParseError(source, l.number, "rate row needs ': rate'");
  }
  const auto toks = split_ws(body);
  if (toks.size() != 5 || toks[2] != "->")
    throw ParseError(source, l.number, "expected 'w1 w2 -> w1' w2'");
  return {label_index(labels, toks[0], source, l.number), label_index(labels, toks[1], source, l.number),
          label_index(labels, toks[3], source, l.number), label_index(labels, toks[4], source, l.number),
          rate};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

ModelSpec parse_model_spec(std::string_view text, const std::string& source) {
  const RawDocument doc = split_sections(text, source);
  auto labels = parse_states(doc, source);
  auto zeta = parse_per_state<int>(doc, "zeta", labels, source, parse_int);
  auto eta = parse_per_state<int>(doc, "eta", labels, source, parse_int);
  auto pi = parse_per_state<double>(doc, "pi", labels, source, parse_double);
  std::vector<Transition> rates;
  if (doc.sections.count("support")) throw ParseError(source, doc.header_line.at("support"), "model files take 'rates', not 'support'");
  for (const RawLine& l : require(doc, "rates", source)) {
    const ParsedRow row = parse_row(l, labels, source, true);
    rates.push_back({row.a, row.b, row.c, row.d, *row.rate});
  }
  return ModelSpec::create(std::move(labels), std::move(zeta), std::move(eta), std::move(pi),
                           std::move(rates));
}

ModelSpec load_model_spec(const std::string& path) { return parse_model_spec(read_file(path), path); }

SynthesisProblem parse_synthesis_problem(std::string_view text, const std::string& source) {
  const RawDocument doc = split_sections(text, source);
  SynthesisProblem p;
  p.labels = parse_states(doc, source);
  p.zeta = parse_per_state<int>(doc, "zeta", p.labels, source, parse_int);
  p.eta = parse_per_state<int>(doc, "eta", p.labels, source, parse_int);
  p.base_measure = parse_per_state<double>(doc, "pi", p.labels, source, parse_double);
  for (const RawLine& l : require(doc, "support", source)) {
    const ParsedRow row = parse_row(l, p.labels, source, false);
    p.support.push_back({row.a, row.b, row.c, row.d});
  }
  return p;
}

SynthesisProblem load_synthesis_problem(const std::string& path) {
  return parse_synthesis_problem(read_file(path), path);
}

std::string format_model_spec(const ModelSpec& spec, std::string_view header_comment) {
  std::ostringstream os;
  if (!header_comment.empty()) {
    std::istringstream lines{std::string(header_comment)};
    for (std::string l; std::getline(lines, l);) os << "# " << l << "\n";
  }
  const auto& labels = spec.labels();
  os << "states:";
  for (const auto& l : labels) os << ' ' << l;
  os << "\nzeta:";
  for (std::size_t i = 0; i < labels.size(); ++i) os << ' ' << labels[i] << '=' << spec.zeta()[i];
  os << "\neta:";
  for (std::size_t i = 0; i < labels.size(); ++i) os << ' ' << labels[i] << '=' << spec.eta()[i];
  os << "\npi:";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < labels.size(); ++i) os << ' ' << labels[i] << '=' << spec.base_measure()[i];
  os << "\nrates:\n";
  for (const Transition& t : spec.transitions()) {
    if (t.rate <= 0.0) continue;
    os << "  " << labels[static_cast<std::size_t>(t.from_left)] << ' '
       << labels[static_cast<std::size_t>(t.from_right)] << " -> "
       << labels[static_cast<std::size_t>(t.to_left)] << ' '
       << labels[static_cast<std::size_t>(t.to_right)] << " : " << t.rate << "\n";
  }
  return os.str();
}

}  // namespace pertlab
