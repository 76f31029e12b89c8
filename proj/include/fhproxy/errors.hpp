#pragma once

#include <stdexcept>
#include <string>

namespace fhproxy {

// Bad arguments or malformed values detected at a public API boundary.
class InvalidInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Filesystem-level failure; message carries the path involved.
class StorageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Structurally broken binary payload; message names the byte offset.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A search that cannot produce a result (e.g. every trial failed).
class SearchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace fhproxy
