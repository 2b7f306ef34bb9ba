#include "memtangle/decode.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "memtangle/errors.hpp"

namespace memtangle {

CaptionBank build_bank(const Dataset& dataset,
                       const std::vector<WindowSample>& train_windows) {
  if (train_windows.empty()) throw DataError("build_bank: empty train set");
  std::set<std::uint64_t> ids;
  for (const auto& w : train_windows)
    ids.insert(w.target_image_ids.begin(), w.target_image_ids.end());

  auto index = dataset.image_index();
  CaptionBank bank;
  bank.entries.reserve(ids.size());
  for (std::uint64_t id : ids) {
    auto it = index.find(id);
    if (it == index.end())
      throw DataError("build_bank: train window references unknown image " +
                      std::to_string(id));
    const ImageRecord& rec = dataset.images[it->second];
    if (rec.captions.empty())
      throw DataError("build_bank: image " + std::to_string(id) +
                      " has no captions");
    CaptionBank::Entry entry;
    entry.image_id = id;
    entry.embedding.resize(static_cast<Eigen::Index>(rec.embedding.size()));
    for (Eigen::Index d = 0; d < entry.embedding.size(); ++d)
      entry.embedding[d] = rec.embedding[static_cast<std::size_t>(d)];
    entry.caption = rec.captions.front();
    bank.entries.push_back(std::move(entry));
  }
  return bank;
}

Retrieval nearest_caption(const Eigen::VectorXd& pred, const CaptionBank& bank) {
  if (bank.entries.empty()) throw DataError("nearest_caption: empty bank");
  double pred_norm = pred.norm();
  if (pred_norm == 0.0)
    throw DataError("nearest_caption: zero-norm prediction");
  const CaptionBank::Entry* best = nullptr;
  double best_sim = 0.0;
  for (const auto& entry : bank.entries) {
    if (entry.embedding.size() != pred.size())
      throw DataError("nearest_caption: dimension mismatch");
    double norm = entry.embedding.norm();
    if (norm == 0.0)
      throw DataError("nearest_caption: zero-norm bank embedding (image " +
                      std::to_string(entry.image_id) + ")");
    double sim = pred.dot(entry.embedding) / (pred_norm * norm);
    if (!best || sim > best_sim ||
        (sim == best_sim && entry.image_id < best->image_id)) {
      best = &entry;
      best_sim = sim;
    }
  }
  return {best->caption, best->image_id, best_sim};
}

std::array<Retrieval, 3> decode_window(
    const std::array<Eigen::VectorXd, 3>& preds, const CaptionBank& bank) {
  return {nearest_caption(preds[0], bank), nearest_caption(preds[1], bank),
          nearest_caption(preds[2], bank)};
}

std::string decoded_jsonl(const std::vector<DecodedRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j;
    j["session"] = r.session_index;
    j["run"] = r.run_index;
    j["anchor"] = r.anchor;
    j["k"] = r.k;
    j["predicted_caption"] = r.predicted_caption;
    j["true_captions"] = r.true_captions;
    j["retrieved_image_id"] = r.retrieved_image_id;
    j["true_image_id"] = r.true_image_id;
    j["similarity"] = r.similarity;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<DecodedRecord> parse_decoded_jsonl(const std::string& text) {
  std::vector<DecodedRecord> records;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      DecodedRecord r;
      r.session_index = j.at("session").get<std::uint32_t>();
      r.run_index = j.at("run").get<std::uint32_t>();
      r.anchor = j.at("anchor").get<std::uint32_t>();
      r.k = j.at("k").get<std::size_t>();
      r.predicted_caption = j.at("predicted_caption").get<std::string>();
      r.true_captions = j.at("true_captions").get<std::vector<std::string>>();
      r.retrieved_image_id = j.at("retrieved_image_id").get<std::uint64_t>();
      r.true_image_id = j.at("true_image_id").get<std::uint64_t>();
      r.similarity = j.at("similarity").get<double>();
      if (r.k > 2)
        throw DataError("decoded JSONL: k out of range on line " +
                        std::to_string(lineno));
      if (r.true_captions.empty())
        throw DataError("decoded JSONL: no true captions on line " +
                        std::to_string(lineno));
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("decoded JSONL: line " + std::to_string(lineno) + ": " +
                      e.what());
    }
  }
  return records;
}

}  // namespace memtangle
