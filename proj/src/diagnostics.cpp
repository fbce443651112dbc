#include "finreport/diagnostics.hpp"

#include <iostream>

namespace finreport {
namespace {
thread_local WarningCapture* active_capture = nullptr;
thread_local bool silenced = false;
}  // namespace

void warn(const std::string& message) {
    if (active_capture != nullptr) {
        active_capture->messages_.push_back(message);
        return;
    }
    if (!silenced) std::cerr << "warning: " << message << '\n';
}

WarningCapture::WarningCapture() : previous_(active_capture) { active_capture = this; }

WarningCapture::~WarningCapture() { active_capture = previous_; }

bool WarningCapture::contains(const std::string& needle) const {
    for (const auto& m : messages_)
        if (m.find(needle) != std::string::npos) return true;
    return false;
}

WarningSilencer::WarningSilencer() : previous_(silenced) { silenced = true; }

WarningSilencer::~WarningSilencer() { silenced = previous_; }

}  // namespace finreport
