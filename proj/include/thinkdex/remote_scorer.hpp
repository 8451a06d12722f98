#pragma once

#include <memory>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "thinkdex/errors.hpp"
#include "thinkdex/scorer.hpp"

namespace thinkdex {

/// Scores via an external model server. Wire protocol:
///   POST <path>  {"context_ids": [int...], "mask_ids": [int...] | null}
///   response     {"logprobs": {"<token id>": float, ...}}
/// The response may carry full-vocabulary values; it is filtered to the mask
/// and renormalized here. A masked-in token missing from the response is a
/// protocol violation. One round trip per decoding step; errors surface to
/// the caller, retry policy is theirs.
class RemoteScorer : public Scorer {
public:
    explicit RemoteScorer(const std::string& endpoint, int timeout_ms = 30000) : timeout_ms_(timeout_ms) {
        std::string rest = endpoint;
        const auto scheme_pos = rest.find("://");
        if (scheme_pos != std::string::npos) {
            if (rest.substr(0, scheme_pos) != "http")
                throw ProtocolError("only http endpoints are supported: " + endpoint);
            rest = rest.substr(scheme_pos + 3);
        }
        const auto slash = rest.find('/');
        host_port_ = slash == std::string::npos ? rest : rest.substr(0, slash);
        path_ = slash == std::string::npos ? "/score" : rest.substr(slash);
        if (host_port_.empty()) throw ProtocolError("endpoint has no host: " + endpoint);
    }

    ScoreResponse score(const ScoreRequest& req) const override {
        nlohmann::json body;
        body["context_ids"] = req.context;
        if (req.candidate_mask)
            body["mask_ids"] = *req.candidate_mask;
        else
            body["mask_ids"] = nullptr;

        httplib::Client client(host_port_);
        client.set_connection_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
        client.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
        client.set_write_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);

        auto res = client.Post(path_, body.dump(), "application/json");
        if (!res) {
            const auto err = httplib::to_string(res.error());
            if (res.error() == httplib::Error::ConnectionTimeout || res.error() == httplib::Error::Read ||
                res.error() == httplib::Error::Write)
                throw Timeout(std::to_string(timeout_ms_) + " ms (" + err + ")");
            throw ScorerUnavailable(host_port_ + ": " + err);
        }
        if (res->status != 200)
            throw ScorerUnavailable(host_port_ + " returned HTTP " + std::to_string(res->status));

        nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("logprobs") || !j["logprobs"].is_object())
            throw ProtocolError("response is not a {\"logprobs\": {...}} object");

        std::vector<std::pair<TokenId, double>> raw;
        try {
            for (const auto& [key, value] : j["logprobs"].items())
                raw.emplace_back(static_cast<TokenId>(std::stoul(key)), value.get<double>());
        } catch (const std::exception& e) {
            throw ProtocolError(std::string("bad logprobs entry: ") + e.what());
        }

        if (req.candidate_mask) {
            std::vector<std::pair<TokenId, double>> masked;
            for (TokenId want : *req.candidate_mask) {
                const auto it = std::find_if(raw.begin(), raw.end(),
                                             [&](const auto& kv) { return kv.first == want; });
                if (it == raw.end())
                    throw ProtocolError("masked-in token " + std::to_string(want) + " missing from response");
                masked.emplace_back(want, it->second);
            }
            raw = std::move(masked);
        }
        if (raw.empty()) throw ProtocolError("empty logprobs in response");
        return make_response(std::move(raw));
    }

private:
    std::string host_port_;
    std::string path_;
    int timeout_ms_;
};

}  // namespace thinkdex
