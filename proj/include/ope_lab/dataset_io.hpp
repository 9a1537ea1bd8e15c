#ifndef OPE_LAB_DATASET_IO_HPP
#define OPE_LAB_DATASET_IO_HPP

#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"

#include "ope_lab/core_model.hpp"

namespace ope_lab {

// JSONL layout: a meta header object, then one object per sample with keys
// x, a, e, r, pb. Doubles are written in shortest round-trip form.
inline void write_jsonl(std::ostream& out, const LoggedDataset& data) {
  nlohmann::json header = {{"n", data.meta.n},
                           {"n_actions", data.meta.n_actions},
                           {"d_x", data.meta.d_x},
                           {"d_e", data.meta.d_e},
                           {"cardinalities", data.meta.cardinalities},
                           {"seed", data.meta.seed}};
  out << header.dump() << '\n';
  for (const LoggedSample& s : data.samples) {
    nlohmann::json row = {
        {"x", s.x}, {"a", s.action}, {"e", s.embedding}, {"r", s.reward}, {"pb", s.behavior_propensity}};
    out << row.dump() << '\n';
  }
  if (!out) throw IoError("failed writing dataset");
}

inline LoggedDataset read_jsonl(std::istream& in) {
  LoggedDataset data;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const nlohmann::json j = nlohmann::json::parse(line);
      if (!have_header) {
        data.meta.n = j.at("n").get<std::size_t>();
        data.meta.n_actions = j.at("n_actions").get<std::size_t>();
        data.meta.d_x = j.at("d_x").get<std::size_t>();
        data.meta.d_e = j.at("d_e").get<std::size_t>();
        data.meta.cardinalities = j.at("cardinalities").get<std::vector<int>>();
        data.meta.seed = j.at("seed").get<std::uint64_t>();
        data.samples.reserve(data.meta.n);
        have_header = true;
        continue;
      }
      LoggedSample s;
      s.x = j.at("x").get<Context>();
      s.action = j.at("a").get<ActionId>();
      s.embedding = j.at("e").get<EmbeddingVector>();
      s.reward = j.at("r").get<double>();
      s.behavior_propensity = j.at("pb").get<double>();
      data.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("dataset line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_header) throw ValidationError("dataset is missing its header line");
  data.validate();
  return data;
}

}  // namespace ope_lab

#endif  // OPE_LAB_DATASET_IO_HPP
