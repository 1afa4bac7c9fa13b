#pragma once

// JSON wire schema shared by the streaming service and its clients.
//
//   client -> server  {"type":"hello","version":1}
//                     {"type":"frame","frame_id":N,"timestamp_ms":T,"width":W,"height":H,
//                      "intrinsics":{"fx":..,"fy":..,"cx":..,"cy":..},
//                      "encoding":"png-base64","data":"...", "plane":{"R":[9],"t":[3]}?}
//   server -> client  {"type":"hello","version":1}
//                     {"type":"result","frame_id":N,"server_latency_ms":L,"detections":[...]}
//                     {"type":"error","frame_id":N|null,"code":"...","message":"..."}
//
// An 8-bit PNG payload is an intensity image; a 16-bit one is an instance
// label image. "plane" (ground plane to camera) is optional and falls back
// to the server's configured plane.

#include "flatpose/core/error.hpp"
#include "flatpose/core/image.hpp"
#include "flatpose/core/types.hpp"
#include "flatpose/estimator/types.hpp"
#include "flatpose/raster/camera.hpp"

#include <boost/beast/core/detail/base64.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace flatpose::server {

inline constexpr int kProtocolVersion = 1;
inline constexpr const char* kPngBase64 = "png-base64";

namespace codes {
inline constexpr const char* kMalformed = "malformed_message";
inline constexpr const char* kUnknownType = "unknown_type";
inline constexpr const char* kHandshake = "handshake_required";
inline constexpr const char* kVersion = "unsupported_version";
inline constexpr const char* kEncoding = "unsupported_encoding";
inline constexpr const char* kInvalidFrame = "invalid_frame";
inline constexpr const char* kFrameOrder = "frame_id_not_increasing";
inline constexpr const char* kDecode = "decode_failure";
inline constexpr const char* kEstimator = "estimator_failure";
}  // namespace codes

/// Protocol violation reported back to the client as an error message.
class ProtocolError : public Error {
public:
    ProtocolError(std::string code, const std::string& message, std::optional<std::int64_t> frame_id = std::nullopt)
        : Error(message), code_(std::move(code)), frame_id_(frame_id) {}

    const std::string& code() const noexcept { return code_; }
    std::optional<std::int64_t> frame_id() const noexcept { return frame_id_; }

private:
    std::string code_;
    std::optional<std::int64_t> frame_id_;
};

struct HelloMessage {
    int version = kProtocolVersion;
};

struct FrameMessage {
    std::int64_t frame_id = 0;
    double timestamp_ms = 0.0;
    raster::CameraIntrinsics cam;  // width and height included
    std::string encoding;
    std::string data;  // base64 payload
    std::optional<Pose> plane;
};

using ClientMessage = std::variant<HelloMessage, FrameMessage>;

inline nlohmann::json pose_fields_to_json(const Pose& p) {
    auto r = nlohmann::json::array();
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) r.push_back(p.R(i, k));
    return {{"R", r}, {"t", {p.t.x(), p.t.y(), p.t.z()}}};
}

inline Pose pose_fields_from_json(const nlohmann::json& j) {
    const auto& r = j.at("R");
    const auto& t = j.at("t");
    if (!r.is_array() || r.size() != 9 || !t.is_array() || t.size() != 3)
        throw SchemaError("pose needs R with 9 numbers and t with 3");
    Pose p;
    for (int i = 0; i < 9; ++i) p.R(i / 3, i % 3) = r[static_cast<std::size_t>(i)].get<double>();
    for (int i = 0; i < 3; ++i) p.t[i] = t[static_cast<std::size_t>(i)].get<double>();
    if (!p.is_valid(1e-6)) throw SchemaError("pose rotation is not orthonormal with determinant +1");
    return p;
}

inline std::string hello_json() { return nlohmann::json{{"type", "hello"}, {"version", kProtocolVersion}}.dump(); }

inline std::string error_json(std::optional<std::int64_t> frame_id, const std::string& code, const std::string& message) {
    nlohmann::json j{{"type", "error"}, {"code", code}, {"message", message}};
    j["frame_id"] = frame_id ? nlohmann::json(*frame_id) : nlohmann::json(nullptr);
    return j.dump();
}

inline std::string result_json(std::int64_t frame_id, double latency_ms, const estimator::EstimatorOutput& out) {
    auto dets = nlohmann::json::array();
    for (const auto& d : out.detections) {
        auto rot = nlohmann::json::array();
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) rot.push_back(d.pose.R(i, k));
        dets.push_back({{"category_id", d.category_id},
                        {"score", d.score},
                        {"bbox", {d.bbox[0], d.bbox[1], d.bbox[2], d.bbox[3]}},
                        {"rotation", rot},
                        {"translation_mm", {d.pose.t.x(), d.pose.t.y(), d.pose.t.z()}}});
    }
    return nlohmann::json{{"type", "result"},
                          {"frame_id", frame_id},
                          {"server_latency_ms", std::max(0.0, latency_ms)},
                          {"detections", dets}}
        .dump();
}

/// Parses one client message; every failure is a ProtocolError.
inline ClientMessage parse_client_message(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError(codes::kMalformed, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
        throw ProtocolError(codes::kMalformed, "message must be an object with a string \"type\"");
    const std::string type = j["type"];
    std::optional<std::int64_t> fid;
    if (j.contains("frame_id") && j["frame_id"].is_number_integer()) fid = j["frame_id"].get<std::int64_t>();
    try {
        if (type == "hello") return HelloMessage{j.at("version").get<int>()};
        if (type != "frame") throw ProtocolError(codes::kUnknownType, "unknown message type '" + type + "'", fid);
        FrameMessage f;
        if (!fid) throw ProtocolError(codes::kMalformed, "frame_id must be an integer");
        f.frame_id = *fid;
        f.timestamp_ms = j.at("timestamp_ms").get<double>();
        f.cam.width = j.at("width").get<int>();
        f.cam.height = j.at("height").get<int>();
        const auto& k = j.at("intrinsics");
        f.cam.fx = k.at("fx").get<double>();
        f.cam.fy = k.at("fy").get<double>();
        f.cam.cx = k.at("cx").get<double>();
        f.cam.cy = k.at("cy").get<double>();
        f.encoding = j.at("encoding").get<std::string>();
        f.data = j.at("data").get<std::string>();
        if (j.contains("plane") && !j["plane"].is_null()) f.plane = pose_fields_from_json(j["plane"]);
        if (f.cam.width <= 0 || f.cam.height <= 0)
            throw ProtocolError(codes::kInvalidFrame, "width and height must be positive", fid);
        try {
            f.cam.validate();
        } catch (const InvalidArgument& e) {
            throw ProtocolError(codes::kInvalidFrame, e.what(), fid);
        }
        if (f.encoding != kPngBase64)
            throw ProtocolError(codes::kEncoding, "unsupported encoding '" + f.encoding + "'; use " + kPngBase64, fid);
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(codes::kMalformed, std::string("bad field: ") + e.what(), fid);
    } catch (const SchemaError& e) {
        throw ProtocolError(codes::kMalformed, e.what(), fid);
    }
}

inline std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    namespace b64 = boost::beast::detail::base64;
    std::string out(b64::encoded_size(bytes.size()), '\0');
    out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
    return out;
}

/// Strict padded base64; throws IoError on any malformed input.
inline std::vector<std::uint8_t> base64_decode(std::string_view text) {
    namespace b64 = boost::beast::detail::base64;
    if (text.size() % 4 != 0) throw IoError("base64 length is not a multiple of 4");
    std::size_t pad = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        const bool alnum = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '+' || c == '/';
        if (c == '=' && i + 2 >= text.size()) {
            ++pad;
        } else if (!alnum || pad > 0) {
            throw IoError("invalid base64 character at " + std::to_string(i));
        }
    }
    std::vector<std::uint8_t> out(b64::decoded_size(text.size()));
    const auto [written, read] = b64::decode(out.data(), text.data(), text.size());
    out.resize(written);
    return out;
}

/// Estimator input from a frame; `fallback_plane` is used when the frame has none.
inline estimator::EstimatorInput decode_frame(const FrameMessage& f, const std::optional<Pose>& fallback_plane) {
    estimator::EstimatorInput in;
    in.frame_id = f.frame_id;
    in.cam = f.cam;
    in.plane = f.plane ? f.plane : fallback_plane;
    DecodedPng png;
    try {
        const auto bytes = base64_decode(f.data);
        png = decode_png(bytes.data(), bytes.size());
    } catch (const IoError& e) {
        throw ProtocolError(codes::kDecode, e.what(), f.frame_id);
    }
    const int w = png.bit_depth == 16 ? png.gray16.width : png.gray8.width;
    const int h = png.bit_depth == 16 ? png.gray16.height : png.gray8.height;
    if (w != f.cam.width || h != f.cam.height)
        throw ProtocolError(codes::kInvalidFrame,
                            "payload is " + std::to_string(w) + "x" + std::to_string(h) + " but the frame declares " +
                                std::to_string(f.cam.width) + "x" + std::to_string(f.cam.height),
                            f.frame_id);
    if (png.bit_depth == 16)
        in.instances = std::move(png.gray16);
    else
        in.intensity = std::move(png.gray8);
    return in;
}

/// Client-side helper: the frame JSON for an image.
template <typename Img>
std::string frame_json(std::int64_t frame_id, double timestamp_ms, const raster::CameraIntrinsics& cam, const Img& image,
                       const std::optional<Pose>& plane = std::nullopt) {
    nlohmann::json j{{"type", "frame"},
                     {"frame_id", frame_id},
                     {"timestamp_ms", timestamp_ms},
                     {"width", cam.width},
                     {"height", cam.height},
                     {"intrinsics", {{"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx}, {"cy", cam.cy}}},
                     {"encoding", kPngBase64},
                     {"data", base64_encode(encode_png(image))}};
    if (plane) j["plane"] = pose_fields_to_json(*plane);
    return j.dump();
}

}  // namespace flatpose::server
