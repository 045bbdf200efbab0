#include <fstream>
#include <sstream>

#include "memgate/model_clients.hpp"

namespace memgate {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read prompt file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (lower(s[i]) != lower(prefix[i])) return false;
  return true;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    const auto first = line.find_first_not_of(" \t\r");
    if (!fn(first == std::string_view::npos ? std::string_view{} : line.substr(first))) return;
    pos = end + 1;
  }
}

}  // namespace

PromptTemplates PromptTemplates::defaults() {
  PromptTemplates t;
  t.answer_system =
      "You are an expert answering multiple-choice questions. Think step by step, then finish "
      "with a final line of the form \"the answer is (X)\" where X is the option letter.";
  t.answer_user = "Question: {query}\nOptions:\n{options}\nAnswer:";
  t.compose_system =
      "You answer questions using only the memory entries provided. If an entry answers the "
      "question, reply with that answer and end with \"the answer is (X)\". If no entry answers "
      "it, reply with the single line ESCALATE.";
  t.compose_user = "Question: {query}\nOptions:\n{options}\nMemory entries:\n{entries}\nReply:";
  t.write_back_system =
      "Decide whether a newly generated answer should be stored for reuse. Reply STORE if it is "
      "correct, self-contained and not already present in memory; otherwise reply SKIP.";
  t.write_back_user = "Question: {query}\nNew answer:\n{answer}\nExisting entries:\n{entries}\nDecision:";
  return t;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  auto t = defaults();
  auto maybe = [&](const char* name, std::string& slot) {
    const auto path = dir / name;
    if (std::filesystem::exists(path)) slot = read_file(path);
  };
  maybe("answer_system.txt", t.answer_system);
  maybe("answer_user.txt", t.answer_user);
  maybe("compose_system.txt", t.compose_system);
  maybe("compose_user.txt", t.compose_user);
  maybe("write_back_system.txt", t.write_back_system);
  maybe("write_back_user.txt", t.write_back_user);
  if (std::filesystem::exists(dir / "exemplars.txt")) t.exemplars = load_exemplars(dir / "exemplars.txt");
  return t;
}

std::vector<std::string> load_exemplars(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read exemplar file " + path.string());
  std::vector<std::string> out;
  std::string block;
  std::string line;
  auto flush = [&] {
    if (block.find_first_not_of(" \t\r\n") != std::string::npos) {
      while (!block.empty() && (block.back() == '\n' || block.back() == '\r')) block.pop_back();
      out.push_back(block);
    }
    block.clear();
  };
  while (std::getline(in, line)) {
    if (line == "%%%" || line == "%%%\r") {
      flush();
    } else {
      block += line;
      block += '\n';
    }
  }
  flush();
  return out;
}

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

std::string format_options(const std::vector<std::string>& options) {
  std::string out;
  for (std::size_t i = 0; i < options.size(); ++i) {
    out += static_cast<char>('A' + i);
    out += ". ";
    out += options[i];
    out += '\n';
  }
  return out;
}

bool is_escalation(std::string_view text) {
  bool hit = false;
  for_each_line(text, [&](std::string_view line) {
    hit = starts_with_ci(line, kEscalationToken);
    return !hit;
  });
  return hit;
}

bool parse_write_back_judgment(std::string_view text) {
  bool store = false;
  for_each_line(text, [&](std::string_view line) {
    if (line.empty()) return true;
    store = starts_with_ci(line, kStoreToken);
    return false;
  });
  return store;
}

}  // namespace memgate
