#pragma once

#include <stdexcept>
#include <string>

namespace sgs {

// Root of every error this library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// The file exists (or was named) but could not be decoded as an image.
class DecodeError : public Error {
public:
    DecodeError(std::string path, const std::string& what)
        : Error("cannot decode image '" + path + "': " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// A backend could not be loaded or reached (missing weights, helper crashed, ...).
class BackendUnavailable : public Error {
public:
    using Error::Error;
};

// Zero-norm embedding; cosine is undefined.
class DegenerateEmbedding : public Error {
public:
    using Error::Error;
};

class PairingError : public Error {
public:
    enum class Kind {
        MissingFile,
        MissingColumn,
        DuplicateId,
        EmptyCell,
        MissingPath,
        SamePath,
        UnresolvedId,
        AmbiguousStem,
        BadFormat,
    };

    PairingError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace sgs
