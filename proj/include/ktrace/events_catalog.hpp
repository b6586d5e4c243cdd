#pragma once

#include <cstdint>

// Canonical provider identifiers and opcodes for the kernel event dictionary
// shipped in configs/event_schema.cfg. The generator, the enrichment rules
// and the graph builder all key off these names; the config file and this
// header describe the same dictionary.
namespace ktrace::events {

// Provider id text, both spellings the config grammar accepts.
inline constexpr const char* kProcessGuid = "3d6fa8d0-fe05-11d0-9dda-00c04fd7ba7c";
inline constexpr const char* kThreadGuid = "3d6fa8d1-fe05-11d0-9dda-00c04fd7ba7c";
inline constexpr const char* kFileIoGuid = "2429279289";  // decimal form
inline constexpr const char* kDiskIoGuid = "3d6fa8d4-fe05-11d0-9dda-00c04fd7ba7c";
inline constexpr const char* kRegistryGuid = "ae53722e-c863-11d2-8659-00c04fa321a1";
inline constexpr const char* kImageGuid = "2cb15d1d-5fc1-11d2-abe1-00a0c911f518";
inline constexpr const char* kTcpIpGuid = "9a280ac0-c8e0-11d1-84e2-00c04fb998a2";
inline constexpr const char* kUdpIpGuid = "bf3a50c5-a9c9-4988-a005-2df0b7c80f80";
inline constexpr const char* kPerfInfoGuid = "ce1dbfb4-137e-4da6-87b0-3f59aa102cbc";
inline constexpr const char* kPageFaultGuid = "3d6fa8d3-fe05-11d0-9dda-00c04fd7ba7c";
inline constexpr const char* kAlpcGuid = "45d8cccd-539f-4b72-a8b7-5c683142609a";
inline constexpr const char* kSystemConfigGuid = "01853a65-418f-4f36-aefc-dc0f1d2fd235";
inline constexpr const char* kDriverGuid = "ed103b89-a798-48a1-81fe-8f1d9afbbac8";

namespace opcode {
inline constexpr std::uint8_t kProcessStart = 1;
inline constexpr std::uint8_t kProcessStop = 2;
inline constexpr std::uint8_t kThreadStart = 1;
inline constexpr std::uint8_t kThreadStop = 2;
inline constexpr std::uint8_t kCSwitch = 36;
inline constexpr std::uint8_t kFileIoName = 0;
inline constexpr std::uint8_t kFileIoCreate = 64;
inline constexpr std::uint8_t kFileIoRead = 67;
inline constexpr std::uint8_t kFileIoWrite = 68;
inline constexpr std::uint8_t kDiskIoRead = 10;
inline constexpr std::uint8_t kRegistryCreate = 10;
inline constexpr std::uint8_t kRegistryRead = 13;
inline constexpr std::uint8_t kRegistryWrite = 14;
inline constexpr std::uint8_t kImageLoad = 10;
inline constexpr std::uint8_t kImageUnload = 2;
inline constexpr std::uint8_t kTcpIpSend = 10;
inline constexpr std::uint8_t kTcpIpRecv = 11;
inline constexpr std::uint8_t kTcpIpConnect = 12;
inline constexpr std::uint8_t kUdpIpSend = 10;
inline constexpr std::uint8_t kSysCallEnter = 51;
inline constexpr std::uint8_t kHardFault = 32;
inline constexpr std::uint8_t kAlpcSend = 33;
inline constexpr std::uint8_t kSystemConfigCpu = 10;
inline constexpr std::uint8_t kVolumeMount = 32;
}  // namespace opcode

namespace name {
inline constexpr const char* kProcessStart = "ProcessStart";
inline constexpr const char* kProcessStop = "ProcessStop";
inline constexpr const char* kThreadStart = "ThreadStart";
inline constexpr const char* kThreadStop = "ThreadStop";
inline constexpr const char* kCSwitch = "CSwitch";
inline constexpr const char* kFileIoName = "FileIOName";
inline constexpr const char* kFileIoCreate = "FileIOCreate";
inline constexpr const char* kFileIoRead = "FileIORead";
inline constexpr const char* kFileIoWrite = "FileIOWrite";
inline constexpr const char* kDiskIoRead = "DiskIORead";
inline constexpr const char* kRegistryCreate = "RegistryCreate";
inline constexpr const char* kRegistryRead = "RegistryRead";
inline constexpr const char* kRegistryWrite = "RegistryWrite";
inline constexpr const char* kImageLoad = "ImageLoad";
inline constexpr const char* kImageUnload = "ImageUnload";
inline constexpr const char* kTcpIpSend = "TcpIpSend";
inline constexpr const char* kTcpIpRecv = "TcpIpRecv";
inline constexpr const char* kTcpIpConnect = "TcpIpConnect";
inline constexpr const char* kUdpIpSend = "UdpIpSend";
inline constexpr const char* kSysCallEnter = "SysCallEnter";
inline constexpr const char* kHardFault = "HardFault";
inline constexpr const char* kAlpcSend = "ALPCSendMessage";
inline constexpr const char* kSystemConfigCpu = "SystemConfigCPU";
inline constexpr const char* kVolumeMount = "VolumeMount";
}  // namespace name

// The thread id the kernel leaves on network events; enrichment replaces it
// with the CSwitch-established thread.
inline constexpr std::uint32_t kMissingTid = 0xFFFFFFFFu;

}  // namespace ktrace::events
