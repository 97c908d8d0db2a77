#pragma once

// HTTP client for the oracle wire protocol:
//   GET  /info    -> {"width":W,"height":H,"channels":C,"num_classes":K,"labels":[...]}
//   POST /predict    {"images":["<base64 raw W·H·C bytes>", ...]}
//                 -> {"probs":[[K reals], ...]}   (request order)
//   errors           HTTP 400 {"error":"<msg>"}

#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "pixelstorm/base64.hpp"
#include "pixelstorm/error.hpp"
#include "pixelstorm/oracle.hpp"

namespace pixelstorm {

struct RemoteOptions {
    /// Extra attempts after a transport failure.
    std::size_t max_retries = 3;
    std::chrono::milliseconds retry_delay{200};
    std::chrono::seconds timeout{60};
};

namespace detail {

/// Splits "http://host:port/prefix" into origin and path prefix.
inline std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos || url.compare(0, scheme, "http") != 0)
        throw UsageError("remote oracle URL must start with http://, got '" + url + "'");
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos)
        return {url, ""};
    std::string prefix = url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/')
        prefix.pop_back();
    return {url.substr(0, slash), prefix};
}

inline OracleInfo parse_info(const nlohmann::json& j) {
    try {
        OracleInfo info;
        info.width = j.at("width").get<std::size_t>();
        info.height = j.at("height").get<std::size_t>();
        info.channels = j.at("channels").get<std::size_t>();
        info.num_classes = j.at("num_classes").get<std::size_t>();
        if (j.contains("labels"))
            info.labels = j.at("labels").get<std::vector<std::string>>();
        info.validate();
        return info;
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed /info response: ") + e.what());
    } catch (const UsageError& e) {
        throw ProtocolError(std::string("invalid /info response: ") + e.what());
    }
}

} // namespace detail

class RemoteOracle final : public Oracle {
public:
    explicit RemoteOracle(const std::string& url, RemoteOptions options = {})
        : options_(options) {
        auto [origin, prefix] = detail::split_url(url);
        prefix_ = std::move(prefix);
        client_ = std::make_unique<httplib::Client>(origin);
        client_->set_connection_timeout(options_.timeout);
        client_->set_read_timeout(options_.timeout);
        client_->set_write_timeout(options_.timeout);
        info_ = detail::parse_info(parse_body(request([&] { return client_->Get(prefix_ + "/info"); }), "/info"));
    }

    const OracleInfo& info() const override { return info_; }

    /// Number of HTTP requests issued, including /info and retries.
    std::size_t requests_sent() const noexcept { return requests_; }

protected:
    ProbabilityVector do_predict(const ImageTensor& image) const override {
        return std::move(do_predict_batch(std::span<const ImageTensor>(&image, 1)).front());
    }

    std::vector<ProbabilityVector> do_predict_batch(std::span<const ImageTensor> images) const override {
        nlohmann::json body;
        auto& arr = body["images"] = nlohmann::json::array();
        for (const auto& img : images)
            arr.push_back(base64::encode(img.data()));
        const std::string payload = body.dump();
        auto reply = parse_body(request([&] {
            return client_->Post(prefix_ + "/predict", payload, "application/json");
        }), "/predict");
        std::vector<ProbabilityVector> out;
        try {
            const auto& probs = reply.at("probs");
            if (!probs.is_array() || probs.size() != images.size())
                throw ProtocolError("/predict returned " + std::to_string(probs.size()) +
                                    " vectors for " + std::to_string(images.size()) + " images");
            out.reserve(probs.size());
            for (const auto& p : probs) {
                auto v = p.get<std::vector<double>>();
                if (v.size() != info_.num_classes)
                    throw ProtocolError("/predict returned " + std::to_string(v.size()) +
                                        " classes, /info declared " + std::to_string(info_.num_classes));
                out.emplace_back(std::move(v));
            }
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(std::string("malformed /predict response: ") + e.what());
        }
        return out;
    }

private:
    template <class Send>
    httplib::Result request(Send&& send) const {
        std::lock_guard lock(mu_);
        std::string last_error;
        for (std::size_t attempt = 0; attempt <= options_.max_retries; ++attempt) {
            if (attempt > 0)
                std::this_thread::sleep_for(options_.retry_delay);
            ++requests_;
            auto res = send();
            if (res && res->status < 500)
                return res;
            last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
        }
        throw TransportError("remote oracle unreachable after " + std::to_string(options_.max_retries + 1) +
                             " attempts: " + last_error);
    }

    static nlohmann::json parse_body(const httplib::Result& res, const char* what) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(std::string(what) + " returned non-JSON body: " + e.what());
        }
        if (res->status != 200) {
            const std::string msg = j.is_object() && j.contains("error") && j["error"].is_string()
                                        ? j["error"].get<std::string>()
                                        : res->body;
            throw ProtocolError(std::string(what) + " failed with HTTP " + std::to_string(res->status) +
                                ": " + msg);
        }
        return j;
    }

    RemoteOptions options_;
    std::string prefix_;
    std::unique_ptr<httplib::Client> client_;
    OracleInfo info_;
    mutable std::mutex mu_;
    mutable std::atomic<std::size_t> requests_{0};
};

} // namespace pixelstorm
