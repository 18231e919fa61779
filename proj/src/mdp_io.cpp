#include "survival/mdp_io.hpp"

#include <sstream>
#include <string_view>
#include <vector>

#include "survival/errors.hpp"
#include "survival/text_io.hpp"

namespace survival {

namespace {

void write_body(std::ostringstream& out, const MdpModel& mdp) {
  out << "d0";
  for (double p : mdp.d0()) out << ' ' << format_double(p);
  out << '\n';
}

void write_rows(std::ostringstream& out, const MdpModel& mdp) {
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      out << s << ' ' << a << ' ' << format_double(mdp.reward(s, a));
      for (double p : mdp.next(s, a)) out << ' ' << format_double(p);
      out << '\n';
    }
  }
}

struct Lines {
  std::vector<std::string_view> lines;
  std::vector<int> numbers;
};

Lines content_lines(std::string_view text) {
  Lines out;
  int number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t stop = text.find('\n', pos);
    std::string_view line = text.substr(pos, stop == std::string_view::npos ? std::string_view::npos : stop - pos);
    ++number;
    line = trim(line);
    if (!line.empty() && line.front() != '#') {
      out.lines.push_back(line);
      out.numbers.push_back(number);
    }
    if (stop == std::string_view::npos) break;
    pos = stop + 1;
  }
  return out;
}

}  // namespace

std::string write_mdp(const TabularMdp& mdp) {
  std::ostringstream out;
  out << "mdp " << mdp.n_states() << ' ' << mdp.n_actions() << " gamma=" << format_double(mdp.gamma()) << '\n';
  write_body(out, mdp);
  write_rows(out, mdp);
  return out.str();
}

std::string write_mdp(const FiniteMdp& mdp) {
  std::ostringstream out;
  out << "mdp " << mdp.n_states() << ' ' << mdp.n_actions() << " horizon=" << mdp.horizon() << '\n';
  write_body(out, mdp);
  out << "terminal";
  for (std::size_t s : mdp.terminal_states()) out << ' ' << s;
  out << '\n';
  write_rows(out, mdp);
  return out.str();
}

AnyMdp parse_mdp(const std::string& text) {
  const Lines in = content_lines(text);
  std::size_t cursor = 0;
  auto need = [&](const char* what) {
    if (cursor >= in.lines.size()) throw ParseError(std::string("unexpected end of MDP file, expected ") + what, 0, what);
    return split_tokens(in.lines[cursor]);
  };

  auto header = need("header");
  const int header_line = in.numbers[cursor];
  if (header.size() != 4 || header[0] != "mdp") {
    throw ParseError("MDP header must read 'mdp S A gamma=<g>|horizon=<H>'", header_line, "mdp");
  }
  const std::size_t n_states = parse_uint(header[1], header_line, "n_states");
  const std::size_t n_actions = parse_uint(header[2], header_line, "n_actions");
  const std::string_view kind = header[3];
  const bool discounted = kind.starts_with("gamma=");
  if (!discounted && !kind.starts_with("horizon=")) throw ParseError("unknown MDP kind", header_line, "gamma|horizon");
  ++cursor;

  auto d0_tokens = need("d0");
  if (d0_tokens.empty() || d0_tokens[0] != "d0" || d0_tokens.size() != n_states + 1) {
    throw ParseError("d0 line must list one probability per state", in.numbers[cursor], "d0");
  }
  std::vector<double> d0;
  for (std::size_t i = 1; i < d0_tokens.size(); ++i) d0.push_back(parse_double(d0_tokens[i], in.numbers[cursor], "d0"));
  ++cursor;

  std::vector<std::size_t> terminal;
  if (!discounted) {
    auto tokens = need("terminal");
    if (tokens.empty() || tokens[0] != "terminal") throw ParseError("finite MDP needs a terminal line", in.numbers[cursor], "terminal");
    for (std::size_t i = 1; i < tokens.size(); ++i) terminal.push_back(parse_uint(tokens[i], in.numbers[cursor], "terminal"));
    ++cursor;
  }

  std::vector<double> transition(n_states * n_actions * n_states, 0.0);
  StateActionTable reward(n_states, n_actions);
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      auto tokens = need("transition row");
      const int line = in.numbers[cursor];
      if (tokens.size() != n_states + 3) throw ParseError("transition row has the wrong length", line, "row");
      if (parse_uint(tokens[0], line, "s") != s || parse_uint(tokens[1], line, "a") != a) {
        throw ParseError("transition rows must appear in (s,a) order", line, "s a");
      }
      reward(s, a) = parse_double(tokens[2], line, "r");
      for (std::size_t t = 0; t < n_states; ++t) {
        transition[(s * n_actions + a) * n_states + t] = parse_double(tokens[3 + t], line, "p");
      }
      ++cursor;
    }
  }
  if (cursor != in.lines.size()) throw ParseError("trailing content after the MDP rows", in.numbers[cursor], "");

  if (discounted) {
    const double gamma = parse_double(kind.substr(6), header_line, "gamma");
    return TabularMdp(n_states, n_actions, std::move(transition), std::move(reward), std::move(d0), gamma);
  }
  const std::size_t horizon = parse_uint(kind.substr(8), header_line, "horizon");
  return FiniteMdp(n_states, n_actions, std::move(transition), std::move(reward), std::move(d0), horizon,
                   std::move(terminal));
}

AnyMdp load_mdp(const std::string& path) { return parse_mdp(read_file(path)); }

std::string write_policy(const Policy& policy) {
  std::ostringstream out;
  if (policy.is_stationary()) {
    out << "policy stationary " << policy.n_states() << ' ' << policy.n_actions() << '\n';
    for (std::size_t s = 0; s < policy.n_states(); ++s) {
      for (std::size_t a = 0; a < policy.n_actions(); ++a) {
        const double p = policy.prob(0, s, a);
        if (p != 0.0) out << s << ' ' << a << ' ' << format_double(p) << '\n';
      }
    }
    return out.str();
  }
  out << "policy time-indexed " << policy.horizon() << ' ' << policy.n_states() << ' ' << policy.n_actions() << '\n';
  for (std::size_t h = 0; h < policy.horizon(); ++h) {
    for (std::size_t s = 0; s < policy.n_states(); ++s) {
      for (std::size_t a = 0; a < policy.n_actions(); ++a) {
        const double p = policy.prob(h, s, a);
        if (p != 0.0) out << h << ' ' << s << ' ' << a << ' ' << format_double(p) << '\n';
      }
    }
  }
  return out.str();
}

Policy parse_policy(const std::string& text) {
  const Lines in = content_lines(text);
  if (in.lines.empty()) throw ParseError("empty policy file", 0, "policy");
  auto header = split_tokens(in.lines[0]);
  const int header_line = in.numbers[0];
  if (header.size() < 2 || header[0] != "policy") throw ParseError("policy header missing", header_line, "policy");
  const bool stationary = header[1] == "stationary";
  if (!stationary && header[1] != "time-indexed") throw ParseError("unknown policy kind", header_line, "kind");
  if (header.size() != (stationary ? 4u : 5u)) throw ParseError("policy header has the wrong arity", header_line, "policy");
  const std::size_t horizon = stationary ? 0 : parse_uint(header[2], header_line, "horizon");
  const std::size_t n_states = parse_uint(header[stationary ? 2 : 3], header_line, "n_states");
  const std::size_t n_actions = parse_uint(header[stationary ? 3 : 4], header_line, "n_actions");
  const std::size_t layers = stationary ? 1 : horizon;
  std::vector<double> probs(layers * n_states * n_actions, 0.0);
  for (std::size_t i = 1; i < in.lines.size(); ++i) {
    auto tokens = split_tokens(in.lines[i]);
    const int line = in.numbers[i];
    if (tokens.size() != (stationary ? 3u : 4u)) throw ParseError("policy row has the wrong arity", line, "row");
    std::size_t k = 0;
    const std::size_t h = stationary ? 0 : parse_uint(tokens[k++], line, "h");
    const std::size_t s = parse_uint(tokens[k++], line, "s");
    const std::size_t a = parse_uint(tokens[k++], line, "a");
    if (h >= layers || s >= n_states || a >= n_actions) throw ParseError("policy row index out of range", line, "row");
    probs[(h * n_states + s) * n_actions + a] = parse_double(tokens[k], line, "prob");
  }
  return stationary ? Policy::stationary(n_states, n_actions, std::move(probs))
                    : Policy::time_indexed(horizon, n_states, n_actions, std::move(probs));
}

}  // namespace survival
