#pragma once

// Transport-independent session logic: handshake, frame ordering, the
// latest-wins queue of depth one and the update-rate throttle. Time is
// passed in explicitly so tests can drive it with a virtual clock.

#include "flatpose/core/error.hpp"
#include "flatpose/estimator/types.hpp"
#include "flatpose/server/protocol.hpp"

#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace flatpose::server {

inline constexpr double kDefaultMaxFps = 5.0;

struct PendingFrame {
    FrameMessage msg;
    double received_ms = 0.0;
};

/**
 * Holds at most one undispatched frame; a newer frame replaces it. A frame
 * is dispatched only when nothing is in flight and at least 1/max_fps
 * seconds have passed since the previous dispatch.
 */
class FrameScheduler {
public:
    explicit FrameScheduler(double max_fps = kDefaultMaxFps) : period_ms_(1000.0 / max_fps) {
        if (!(max_fps > 0.0)) throw InvalidArgument("max_fps must be > 0");
    }

    /// Queues `f`; returns the id of a frame it displaced, if any.
    std::optional<std::int64_t> offer(PendingFrame f) {
        std::optional<std::int64_t> dropped;
        if (pending_) {
            dropped = pending_->msg.frame_id;
            ++dropped_;
        }
        pending_ = std::move(f);
        return dropped;
    }

    std::optional<PendingFrame> take(double now_ms) {
        if (busy_ || !pending_ || now_ms < next_slot_ms_) return std::nullopt;
        busy_ = true;
        next_slot_ms_ = now_ms + period_ms_;
        std::optional<PendingFrame> out = std::move(pending_);
        pending_.reset();
        return out;
    }

    void complete() { busy_ = false; }

    bool busy() const { return busy_; }
    bool has_pending() const { return pending_.has_value(); }
    double next_slot_ms() const { return next_slot_ms_; }
    std::size_t dropped() const { return dropped_; }

private:
    double period_ms_;
    double next_slot_ms_ = -std::numeric_limits<double>::infinity();
    bool busy_ = false;
    std::optional<PendingFrame> pending_;
    std::size_t dropped_ = 0;
};

struct SessionConfig {
    double max_fps = kDefaultMaxFps;
    std::optional<Pose> plane;  // used when a frame carries none

    void validate() const {
        if (!(max_fps > 0.0 && max_fps <= 1000.0)) throw InvalidArgument("max_fps must lie in (0, 1000]");
        if (plane && !plane->is_valid(1e-6)) throw InvalidArgument("configured plane pose is not a rigid transform");
    }
};

class SessionCore {
public:
    explicit SessionCore(SessionConfig cfg = {}) : cfg_((cfg.validate(), cfg)), scheduler_(cfg_.max_fps) {}

    /// Handles one text message; returns replies to send right away. Valid
    /// frames go to the scheduler instead.
    std::vector<std::string> on_text(std::string_view text, double now_ms) {
        try {
            const ClientMessage m = parse_client_message(text);
            if (const auto* h = std::get_if<HelloMessage>(&m)) {
                if (h->version != kProtocolVersion)
                    return {error_json(std::nullopt, codes::kVersion,
                                       "protocol version " + std::to_string(h->version) + " is not supported; use " +
                                           std::to_string(kProtocolVersion))};
                handshake_ = true;
                return {hello_json()};
            }
            const auto& f = std::get<FrameMessage>(m);
            if (!handshake_) return {error_json(f.frame_id, codes::kHandshake, "send hello before frames")};
            if (last_id_ && f.frame_id <= *last_id_)
                return {error_json(f.frame_id, codes::kFrameOrder,
                                   "frame_id " + std::to_string(f.frame_id) + " is not greater than " +
                                       std::to_string(*last_id_))};
            last_id_ = f.frame_id;
            scheduler_.offer({f, now_ms});
            return {};
        } catch (const ProtocolError& e) {
            return {error_json(e.frame_id(), e.code(), e.what())};
        }
    }

    FrameScheduler& scheduler() { return scheduler_; }
    const SessionConfig& config() const { return cfg_; }

    /// Runs `est` on a dispatched frame and returns the result or error
    /// message. Reads only immutable state, so any thread may call it.
    std::string run(const estimator::Estimator& est, const PendingFrame& f, const std::function<double()>& now_ms) const {
        try {
            const auto input = decode_frame(f.msg, cfg_.plane);
            const auto out = est.estimate(input);
            return result_json(f.msg.frame_id, now_ms() - f.received_ms, out);
        } catch (const ProtocolError& e) {
            return error_json(f.msg.frame_id, e.code(), e.what());
        } catch (const std::exception& e) {
            return error_json(f.msg.frame_id, codes::kEstimator, e.what());
        }
    }

private:
    SessionConfig cfg_;
    FrameScheduler scheduler_;
    bool handshake_ = false;
    std::optional<std::int64_t> last_id_;
};

}  // namespace flatpose::server
