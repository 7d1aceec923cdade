#include "hmr/io.hpp"

#include <cstring>
#include <fstream>

#include "hmr/common.hpp"

namespace hmr {

namespace {

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& is, const std::string& what) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("container: truncated while reading " + what);
    return v;
}

void put_string(std::ostream& os, const std::string& s) {
    put<uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string take_string(std::istream& is, const std::string& what) {
    uint64_t n = take<uint64_t>(is, what + " length");
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw IoError("container: truncated while reading " + what);
    return s;
}

}  // namespace

void write_container(const std::string& path, const Container& c) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("container: cannot open " + path + " for writing");
    os.write(c.magic.data(), 4);
    put<uint32_t>(os, c.version);
    put_string(os, c.manifest_json);
    put<uint32_t>(os, static_cast<uint32_t>(c.entries.size()));
    for (const ContainerEntry& e : c.entries) {
        put_string(os, e.name);
        put<uint32_t>(os, static_cast<uint32_t>(e.tensor.shape.size()));
        for (int d : e.tensor.shape) put<int32_t>(os, d);
        os.write(reinterpret_cast<const char*>(e.tensor.data.data()),
                 static_cast<std::streamsize>(e.tensor.data.size() * sizeof(double)));
    }
    if (!os) throw IoError("container: write failed for " + path);
}

Container read_container(const std::string& path, const std::array<char, 4>& expected_magic) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("container: cannot open " + path);
    Container c;
    is.read(c.magic.data(), 4);
    if (!is || c.magic != expected_magic)
        throw IoError("container: magic mismatch in " + path + " (want " +
                      std::string(expected_magic.data(), 4) + ")");
    c.version = take<uint32_t>(is, "version");
    c.manifest_json = take_string(is, "manifest");
    uint32_t n = take<uint32_t>(is, "entry count");
    c.entries.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
        ContainerEntry e;
        e.name = take_string(is, "entry name");
        uint32_t nd = take<uint32_t>(is, e.name + " ndim");
        std::vector<int> shape(nd);
        for (uint32_t d = 0; d < nd; ++d) shape[d] = take<int32_t>(is, e.name + " dim");
        e.tensor = Tensor(shape);
        is.read(reinterpret_cast<char*>(e.tensor.data.data()),
                static_cast<std::streamsize>(e.tensor.data.size() * sizeof(double)));
        if (!is) throw IoError("container: truncated tensor data for " + e.name);
        c.entries.push_back(std::move(e));
    }
    return c;
}

uint64_t fnv1a(const void* data, size_t n, uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

uint64_t file_fnv1a(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("fnv1a: cannot open " + path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (is) {
        is.read(buf, sizeof(buf));
        h = fnv1a(buf, static_cast<size_t>(is.gcount()), h);
    }
    return h;
}

}  // namespace hmr
