#include "mdpx/report.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

namespace mdpx {

Json ratJson(const Rat& r, int digits) {
    Json j;
    j["exact"] = r.toString();
    j["decimal"] = r.toDecimalString(digits);
    return j;
}

std::string contentDigest(const std::string& content) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : content) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a:") + buf;
}

std::string readFile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace mdpx
