#pragma once

#include <string>
#include <vector>

namespace finreport {

// Emit a non-fatal warning. Goes to stderr unless a WarningCapture is active
// on the calling thread.
void warn(const std::string& message);

// Collects warnings emitted on this thread while alive.
class WarningCapture {
public:
    WarningCapture();
    ~WarningCapture();
    WarningCapture(const WarningCapture&) = delete;
    WarningCapture& operator=(const WarningCapture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }
    bool contains(const std::string& needle) const;

private:
    friend void warn(const std::string&);
    std::vector<std::string> messages_;
    WarningCapture* previous_;
};

// Silences warnings on this thread while alive (used by replication loops).
class WarningSilencer {
public:
    WarningSilencer();
    ~WarningSilencer();
    WarningSilencer(const WarningSilencer&) = delete;
    WarningSilencer& operator=(const WarningSilencer&) = delete;

private:
    bool previous_;
};

}  // namespace finreport
