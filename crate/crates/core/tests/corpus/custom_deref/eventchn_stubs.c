#include <caml/mlvalues.h>
#include <caml/memory.h>
#include <caml/custom.h>
#include <caml/fail.h>

#define _H(__h) (*((xenevtchn_handle **)Data_custom_val(__h)))

CAMLprim value stub_eventchn_notify(value xce, value port)
{
        CAMLparam2(xce, port);
        int rc;

        caml_enter_blocking_section();

        rc = xenevtchn_notify(_H(xce), Int_val(port));

        caml_leave_blocking_section();

        if (rc == -1)
                caml_failwith("evtchn notify failed");

        CAMLreturn(Val_unit);
}
