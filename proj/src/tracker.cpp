#include "rtls/tracker.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace rtls {

void TrackerOptions::validate() const {
  constraint().validate();
  norm.validate();
  if (lookback < 1) throw Error("lookback must be >= 1");
  if (!(reorder_tolerance >= 0.0)) throw Error("reorder tolerance must be >= 0");
}

Tracker::Tracker(std::shared_ptr<const NetParams> params, std::shared_ptr<const ZoneGraph> graph,
                 TrackerOptions options)
    : params_(std::move(params)), graph_(std::move(graph)), options_(options) {
  if (!params_ || !graph_) throw Error("tracker needs parameters and a building");
  options_.validate();
  if (params_->shape.class_dim != graph_->zone_count())
    throw Error(fmt::format("model predicts {} zones but the building has {}",
                            params_->shape.class_dim, graph_->zone_count()));
  recurrent_ = RecurrentState::zeros(params_->shape);
}

std::vector<ZoneDecision> Tracker::ingest(const RssiFrame& frame) {
  if (static_cast<int>(frame.values.size()) != params_->shape.input_dim)
    throw Error(fmt::format("frame has {} sensor values, model expects {}", frame.values.size(),
                            params_->shape.input_dim));
  std::vector<ZoneDecision> out;
  if (!clock_) {
    clock_ = WindowClock{frame.timestamp, options_.step_interval};
    newest_ = frame.timestamp;
  }
  if (frame.timestamp < newest_ - options_.reorder_tolerance) {
    ++dropped_;
    return out;
  }
  const std::int64_t k = std::max(clock_->index_of(frame.timestamp), window_index_);
  while (window_index_ < k) {
    out.push_back(decide(clock_->end_of(window_index_)));
    window_.clear();
    ++window_index_;
  }
  window_.push_back(frame);
  newest_ = std::max(newest_, frame.timestamp);
  return out;
}

std::optional<ZoneDecision> Tracker::flush() {
  if (!clock_ || window_.empty()) return std::nullopt;
  auto d = decide(clock_->end_of(window_index_));
  window_.clear();
  ++window_index_;
  return d;
}

ZoneDecision Tracker::decide(double timestamp) {
  const auto& p = *params_;
  history_.push_back(
      impute_and_normalize(temporal_average(window_, p.shape.input_dim), options_.norm));
  while (static_cast<int>(history_.size()) > options_.lookback) history_.pop_front();

  auto state = RecurrentState::zeros(p.shape);
  for (const auto& x : history_) state = lstm_step(p, x, state);
  recurrent_ = std::move(state);

  ZoneDecision d;
  d.timestamp = timestamp;
  d.raw_probs = classifier_forward(p, recurrent_.output(), Mode::kInfer);
  if (!prev_zone_) {
    d.constrained_probs = d.raw_probs;
    d.zone = argmax(d.raw_probs);
  } else {
    auto post = apply_constraint(d.raw_probs, *prev_zone_, *graph_, options_.constraint());
    d.constrained_probs = std::move(post.constrained);
    d.zone = post.chosen;
  }
  prev_zone_ = d.zone;
  ++emitted_;
  return d;
}

std::vector<ZoneDecision> run_offline(std::shared_ptr<const NetParams> params,
                                      std::shared_ptr<const ZoneGraph> graph,
                                      const TrackerOptions& options,
                                      std::span<const RssiFrame> frames) {
  Tracker tracker(std::move(params), std::move(graph), options);
  std::vector<ZoneDecision> out;
  for (const auto& f : frames) {
    auto ds = tracker.ingest(f);
    for (auto& d : ds) out.push_back(std::move(d));
  }
  if (auto last = tracker.flush()) out.push_back(std::move(*last));
  return out;
}

TrackerPool::TrackerPool(std::shared_ptr<const NetParams> params,
                         std::shared_ptr<const ZoneGraph> graph, TrackerOptions options)
    : params_(std::move(params)), graph_(std::move(graph)), options_(options) {}

std::vector<ZoneDecision> TrackerPool::ingest(const std::string& tag, const RssiFrame& frame) {
  auto it = trackers_.find(tag);
  if (it == trackers_.end()) it = trackers_.emplace(tag, Tracker(params_, graph_, options_)).first;
  return it->second.ingest(frame);
}

std::vector<std::pair<std::string, ZoneDecision>> TrackerPool::flush_all() {
  std::vector<std::pair<std::string, ZoneDecision>> out;
  for (auto& [tag, tracker] : trackers_)
    if (auto d = tracker.flush()) out.emplace_back(tag, std::move(*d));
  return out;
}

int TrackerPool::dropped_frames() const {
  int n = 0;
  for (const auto& [tag, tracker] : trackers_) n += tracker.dropped_frames();
  return n;
}

}  // namespace rtls
