#pragma once

#include <atomic>
#include <string>
#include <thread>

#include <httplib.h>

#include "finreport/report.hpp"

namespace finreport::testkit {

// Decomposition and VaR behind tests/data/report_golden.md.
inline ReturnDecomposition golden_decomposition() {
    ReturnDecomposition d;
    d.alpha = 0.0005;
    d.market = 0.012;
    d.size = -0.003;
    d.valuation = 0.001;
    d.profitability = 0.0;
    d.investment = -0.0005;
    d.news_effect = 0.004;
    d.predicted_excess_return = 0.014;
    return d;
}

inline VarEstimate golden_var() { return {-0.0215, 0.95, 1.6448536269514722}; }

inline ReportContext golden_context() {
    return {"ACME", Date(2024, 5, 17), "ACME signs multi-year supply agreement", Label::positive};
}

// Local HTTP server answering POST /echo with the request body and POST /fail with 500.
class EchoServer {
public:
    EchoServer() {
        server_.Post("/echo", [](const httplib::Request& req, httplib::Response& res) {
            res.set_content(req.body, "application/json");
        });
        server_.Post("/fail", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~EchoServer() {
        server_.stop();
        thread_.join();
    }
    EchoServer(const EchoServer&) = delete;
    EchoServer& operator=(const EchoServer&) = delete;

    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace finreport::testkit
